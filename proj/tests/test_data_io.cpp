#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfnet/checkpoint.hpp"
#include "msfnet/config.hpp"
#include "msfnet/data.hpp"
#include "msfnet/dataset.hpp"
#include "msfnet/image_io.hpp"
#include "msfnet/pfm.hpp"

using namespace msfnet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("msfnet_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

bool bit_equal(const Tensor<float>& a, const Tensor<float>& b) {
    if (!(a.shape() == b.shape())) return false;
    return std::memcmp(a.data().data(), b.data().data(),
                       static_cast<size_t>(a.numel()) * sizeof(float)) == 0;
}

std::vector<uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>());
}

// Per-pixel occlusion decided by pairwise comparison instead of the
// generator's forward scan: x loses its target x-d(x) to any pixel with a
// larger disparity, or an equal one further left.
bool occluded_pairwise(const std::vector<int64_t>& d, int64_t w, int64_t x) {
    const int64_t xr = x - d[static_cast<size_t>(x)];
    if (xr < 0) return true;
    for (int64_t o = 0; o < w; ++o) {
        if (o == x || o - d[static_cast<size_t>(o)] != xr) continue;
        if (d[static_cast<size_t>(o)] > d[static_cast<size_t>(x)]) return true;
        if (d[static_cast<size_t>(o)] == d[static_cast<size_t>(x)] && o < x) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("flat zero-disparity stereogram is a trivial pair") {
    auto s = generate_random_dot<float>(5, 16, 32, 0, 0);
    REQUIRE(bit_equal(s.left, s.right));
    for (float v : s.gt.values.data()) REQUIRE(v == 0.0f);
    for (float v : s.gt.valid.data()) REQUIRE(v == 1.0f);
    for (float v : s.occlusion.data()) REQUIRE(v == 0.0f);
    REQUIRE(s.gt.scale == 1);
}

TEST_CASE("generator is deterministic per seed") {
    auto a = generate_random_dot<float>(42, 24, 64, 8, 3);
    auto b = generate_random_dot<float>(42, 24, 64, 8, 3);
    REQUIRE(bit_equal(a.left, b.left));
    REQUIRE(bit_equal(a.right, b.right));
    REQUIRE(bit_equal(a.gt.values, b.gt.values));
    REQUIRE(bit_equal(a.occlusion, b.occlusion));

    auto c = generate_random_dot<float>(43, 24, 64, 8, 3);
    REQUIRE(!bit_equal(a.left, c.left));
}

TEST_CASE("warping the right view by the ground truth recovers the left") {
    auto s = generate_random_dot<float>(7, 32, 64, 9, 3);
    Tensor<float> rec = warp_horizontal(s.right, s.gt.values);

    int64_t occluded = 0;
    for (int64_t y = 0; y < 32; ++y) {
        for (int64_t x = 0; x < 64; ++x) {
            if (s.occlusion.at(0, 0, y, x) != 0.0f) {
                ++occluded;
                continue;
            }
            for (int64_t c = 0; c < 3; ++c) {
                REQUIRE(std::abs(rec.at(0, c, y, x) - s.left.at(0, c, y, x)) <= 1e-6f);
            }
        }
    }
    REQUIRE(occluded > 0);  // the field has depth discontinuities
}

TEST_CASE("occlusion mask matches a pairwise z-buffer re-derivation") {
    auto s = generate_random_dot<float>(11, 8, 24, 5, 2);
    for (int64_t y = 0; y < 8; ++y) {
        std::vector<int64_t> d(24);
        for (int64_t x = 0; x < 24; ++x) {
            d[static_cast<size_t>(x)] = std::llround(s.gt.values.at(0, 0, y, x));
        }
        for (int64_t x = 0; x < 24; ++x) {
            const bool expect = occluded_pairwise(d, 24, x);
            REQUIRE((s.occlusion.at(0, 0, y, x) != 0.0f) == expect);
        }
    }
}

TEST_CASE("generator validates its geometry") {
    REQUIRE_THROWS_AS(generate_random_dot<float>(1, 0, 32, 0, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(generate_random_dot<float>(1, 16, 32, 8, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(generate_random_dot<float>(1, 16, 32, -1, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(generate_random_dot<float>(1, 4, 32, 2, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(generate_random_dot<float>(1, 16, 32, 2, -1), std::invalid_argument);
    REQUIRE_NOTHROW(generate_random_dot<float>(1, 16, 33, 8, 0));
}

TEST_CASE("full-size crop is the identity") {
    auto s = generate_random_dot<float>(3, 64, 128, 10, 3);
    auto c = random_crop(s, 64, 128, 99);
    REQUIRE(bit_equal(c.left, s.left));
    REQUIRE(bit_equal(c.right, s.right));
    REQUIRE(bit_equal(c.gt.values, s.gt.values));
    REQUIRE(bit_equal(c.gt.valid, s.gt.valid));
    REQUIRE(bit_equal(c.occlusion, s.occlusion));
}

TEST_CASE("crop applies one window to every field") {
    auto s = generate_random_dot<float>(13, 128, 192, 12, 4);
    const uint64_t seed = 4242;
    auto c = random_crop(s, 64, 64, seed);

    // replay the generator's window draw to locate the crop
    std::mt19937 rng(static_cast<uint32_t>(seed));
    const int64_t oy = std::uniform_int_distribution<int64_t>(0, 128 - 64)(rng);
    const int64_t ox = std::uniform_int_distribution<int64_t>(0, 192 - 64)(rng);
    for (int64_t y = 0; y < 64; ++y) {
        for (int64_t x = 0; x < 64; ++x) {
            REQUIRE(c.left.at(0, 0, y, x) == s.left.at(0, 0, oy + y, ox + x));
            REQUIRE(c.right.at(0, 2, y, x) == s.right.at(0, 2, oy + y, ox + x));
            REQUIRE(c.gt.values.at(0, 0, y, x) == s.gt.values.at(0, 0, oy + y, ox + x));
            REQUIRE(c.occlusion.at(0, 0, y, x) == s.occlusion.at(0, 0, oy + y, ox + x));
        }
    }

    // away from the left border the crop still satisfies warp consistency
    Tensor<float> rec = warp_horizontal(c.right, c.gt.values);
    for (int64_t y = 0; y < 64; ++y) {
        for (int64_t x = 12; x < 64; ++x) {
            if (c.occlusion.at(0, 0, y, x) != 0.0f) continue;
            for (int64_t ch = 0; ch < 3; ++ch) {
                REQUIRE(std::abs(rec.at(0, ch, y, x) - c.left.at(0, ch, y, x)) <= 1e-6f);
            }
        }
    }

    auto again = random_crop(s, 64, 64, seed);
    REQUIRE(bit_equal(again.left, c.left));
}

TEST_CASE("crop window validation") {
    auto s = generate_random_dot<float>(3, 64, 128, 10, 3);
    REQUIRE_THROWS_WITH(random_crop(s, 128, 128, 1),
                        Catch::Matchers::ContainsSubstring("larger than image"));
    REQUIRE_THROWS_WITH(random_crop(s, 32, 32, 1),
                        Catch::Matchers::ContainsSubstring("divisible by 64"));
}

TEST_CASE("large-disparity filter keeps iff at most a quarter exceeds 300") {
    auto make = [](int64_t above, int64_t total, float hi) {
        StereoSample<float> s;
        Tensor<float> gt(Shape{1, 1, 1, total});
        for (int64_t i = 0; i < total; ++i) gt.data()[i] = i < above ? hi : 10.0f;
        s.gt = make_disparity(std::move(gt));
        return s;
    };
    DatasetFilterRule rule;

    REQUIRE(apply_filter(make(0, 100, 0.0f), rule));        // all small
    REQUIRE_FALSE(apply_filter(make(30, 100, 400.0f), rule));
    REQUIRE(apply_filter(make(25, 100, 400.0f), rule));     // exactly 25%: keep
    REQUIRE_FALSE(apply_filter(make(26, 100, 400.0f), rule));
    REQUIRE(apply_filter(make(25, 100, 300.0f), rule));     // 300 itself is not "larger"

    auto s = make(50, 100, 1000.0f);
    for (int64_t i = 0; i < 50; ++i) s.gt.valid.data()[i] = 0.0f;
    REQUIRE(apply_filter(s, rule));  // invalid pixels do not count

    for (auto& v : s.gt.valid.data()) v = 0.0f;
    REQUIRE_THROWS_WITH(apply_filter(s, rule),
                        Catch::Matchers::ContainsSubstring("no valid ground truth"));
}

TEST_CASE("pfm round-trip is bit-exact") {
    const fs::path dir = temp_dir("pfm");
    const std::string path = (dir / "map.pfm").string();

    std::mt19937 rng(17);
    Tensor<float> t(Shape{1, 1, 8, 12});
    std::uniform_real_distribution<double> dist(-500.0, 500.0);
    for (auto& v : t.data()) v = static_cast<float>(dist(rng));
    save_pfm(t, path);
    REQUIRE(bit_equal(load_pfm(path), t));

    // header: magic, width height, negative scale for little-endian
    const auto bytes = read_bytes(path);
    const std::string head(bytes.begin(), bytes.begin() + 13);
    REQUIRE(head == "Pf\n12 8\n-1.0\n");
    REQUIRE(bytes.size() == 13 + 8 * 12 * 4);
}

TEST_CASE("pfm survives zeros, denormals and harsh values") {
    const fs::path dir = temp_dir("pfm_bits");
    const std::string path = (dir / "bits.pfm").string();
    std::mt19937 rng(23);

    for (int round = 0; round < 1000; ++round) {
        Tensor<float> t(Shape{1, 1, 2, 3});
        for (int64_t i = 0; i < 6; ++i) {
            uint32_t bits = rng();
            if (round % 3 == 0) bits &= 0x807fffffu;          // denormals and zeros
            if ((bits & 0x7f800000u) == 0x7f800000u) bits &= 0xbf800000u;  // keep finite
            std::memcpy(&t.data()[i], &bits, 4);
        }
        save_pfm(t, path);
        REQUIRE(bit_equal(load_pfm(path), t));
    }
}

TEST_CASE("pfm rows are stored bottom to top") {
    const fs::path dir = temp_dir("pfm_rows");
    const std::string path = (dir / "rows.pfm").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "Pf\n12 8\n-1.0\n";
        for (int fr = 0; fr < 8; ++fr) {
            const float v = static_cast<float>(fr);
            for (int x = 0; x < 12; ++x) {
                out.write(reinterpret_cast<const char*>(&v), 4);
            }
        }
    }
    Tensor<float> t = load_pfm(path);
    REQUIRE(t.shape() == make_shape(1, 1, 8, 12));
    REQUIRE(t.at(0, 0, 7, 0) == 0.0f);   // first file row is the bottom row
    REQUIRE(t.at(0, 0, 0, 11) == 7.0f);
}

TEST_CASE("pfm reads a big-endian payload") {
    const fs::path dir = temp_dir("pfm_be");
    const std::string path = (dir / "be.pfm").string();
    const float vals[2] = {1.5f, -42.25f};
    {
        std::ofstream out(path, std::ios::binary);
        out << "Pf\n2 1\n1.0\n";
        for (float v : vals) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            const char be[4] = {static_cast<char>(bits >> 24), static_cast<char>(bits >> 16),
                                static_cast<char>(bits >> 8), static_cast<char>(bits)};
            out.write(be, 4);
        }
    }
    Tensor<float> t = load_pfm(path);
    REQUIRE(t.at(0, 0, 0, 0) == 1.5f);
    REQUIRE(t.at(0, 0, 0, 1) == -42.25f);
}

TEST_CASE("pfm rejects malformed files") {
    const fs::path dir = temp_dir("pfm_bad");
    auto write_file = [&](const std::string& name, const std::string& content) {
        const std::string path = (dir / name).string();
        std::ofstream out(path, std::ios::binary);
        out << content;
        return path;
    };

    REQUIRE_THROWS_WITH(load_pfm((dir / "missing.pfm").string()),
                        Catch::Matchers::ContainsSubstring("cannot open"));
    REQUIRE_THROWS_WITH(load_pfm(write_file("color.pfm", "PF\n2 2\n-1.0\n")),
                        Catch::Matchers::ContainsSubstring("color images unsupported"));
    REQUIRE_THROWS_WITH(load_pfm(write_file("magic.pfm", "P5\n2 2\n255\n")),
                        Catch::Matchers::ContainsSubstring("bad magic"));
    REQUIRE_THROWS_WITH(load_pfm(write_file("zero.pfm", "Pf\n2 2\n0.0\n")),
                        Catch::Matchers::ContainsSubstring("zero scale"));
    REQUIRE_THROWS_WITH(load_pfm(write_file("header.pfm", "Pf\nab cd\n-1.0\n")),
                        Catch::Matchers::ContainsSubstring("malformed header"));
    REQUIRE_THROWS_WITH(load_pfm(write_file("short.pfm", "Pf\n4 4\n-1.0\nxx")),
                        Catch::Matchers::ContainsSubstring("truncated payload"));

    Tensor<float> bad(Shape{1, 3, 2, 2});
    REQUIRE_THROWS_WITH(save_pfm(bad, (dir / "bad.pfm").string()),
                        Catch::Matchers::ContainsSubstring("expected 1x1xHxW"));
}

TEST_CASE("pgm quantization rounds half up") {
    const fs::path dir = temp_dir("pgm");
    const std::string path = (dir / "g.pgm").string();
    Tensor<float> t(Shape{1, 1, 1, 5});
    t.data() = {0.0f, 0.5f, 1.0f, -0.2f, 1.7f};
    save_pgm(t, path);

    const auto bytes = read_bytes(path);
    const std::string head(bytes.begin(), bytes.begin() + 11);
    REQUIRE(head == "P5\n5 1\n255\n");
    REQUIRE(bytes[11] == 0);
    REQUIRE(bytes[12] == 128);
    REQUIRE(bytes[13] == 255);
    REQUIRE(bytes[14] == 0);
    REQUIRE(bytes[15] == 255);

    Tensor<float> color(Shape{1, 3, 1, 5});
    REQUIRE_THROWS_WITH(save_pgm(color, path),
                        Catch::Matchers::ContainsSubstring("expected 1x1xHxW"));
}

TEST_CASE("ppm round-trips 8-bit color exactly") {
    const fs::path dir = temp_dir("ppm");
    const std::string path = (dir / "c.ppm").string();
    std::mt19937 rng(31);
    Tensor<float> t(Shape{1, 3, 6, 9});
    std::uniform_int_distribution<int> level(0, 255);
    for (auto& v : t.data()) v = static_cast<float>(level(rng)) / 255.0f;
    save_ppm(t, path);
    REQUIRE(bit_equal(load_ppm<float>(path), t));

    REQUIRE_THROWS_WITH(load_ppm<float>((temp_dir("pgm2") / "g.pgm").string()),
                        Catch::Matchers::ContainsSubstring("cannot open"));
    const std::string pgm_path = (dir / "g.pgm").string();
    Tensor<float> gray(Shape{1, 1, 1, 1});
    save_pgm(gray, pgm_path);
    REQUIRE_THROWS_WITH(load_ppm<float>(pgm_path),
                        Catch::Matchers::ContainsSubstring("expected P6"));
}

TEST_CASE("disparity export maps the range onto 8 bits") {
    const fs::path dir = temp_dir("export");
    const std::string path = (dir / "d.pgm").string();
    Tensor<float> v(Shape{1, 1, 1, 5});
    v.data() = {0.0f, 5.0f, 10.0f, -1.0f, 15.0f};
    export_disparity_image(make_disparity(v), path, 10.0);

    const auto bytes = read_bytes(path);
    REQUIRE(bytes[11] == 0);     // black at zero
    REQUIRE(bytes[12] == 128);   // half range, rounded half up
    REQUIRE(bytes[13] == 255);   // white at max
    REQUIRE(bytes[14] == 0);     // clamped below
    REQUIRE(bytes[15] == 255);   // clamped above

    REQUIRE_THROWS_WITH(export_disparity_image(make_disparity(v), path, 0.0),
                        Catch::Matchers::ContainsSubstring("max_disp must be > 0"));
}

TEST_CASE("dataset directory round-trip") {
    const fs::path dir = temp_dir("dataset");
    auto s0 = generate_random_dot<float>(51, 64, 128, 10, 3);
    auto s1 = generate_random_dot<float>(52, 64, 128, 10, 3);
    for (int64_t x = 0; x < 16; ++x) s0.gt.valid.at(0, 0, 5, x) = 0.0f;

    write_sample(s0, dir.string(), 0);
    write_sample(s1, dir.string(), 1);
    REQUIRE(sample_stem(3) == "0003");
    REQUIRE(fs::exists(dir / "left" / "0000.ppm"));
    REQUIRE(fs::exists(dir / "disp" / "0001.pfm"));
    REQUIRE(count_samples(dir.string()) == 2);

    auto r0 = load_sample<float>(dir.string(), 0);
    REQUIRE(r0.left.shape() == s0.left.shape());
    for (int64_t i = 0; i < r0.left.numel(); ++i) {
        REQUIRE(std::abs(r0.left.data()[i] - s0.left.data()[i]) <= 0.5f / 255.0f + 1e-6f);
    }
    for (int64_t i = 0; i < r0.gt.values.numel(); ++i) {
        REQUIRE(r0.gt.valid.data()[i] == s0.gt.valid.data()[i]);
        if (r0.gt.valid.data()[i] != 0.0f) {
            REQUIRE(r0.gt.values.data()[i] == s0.gt.values.data()[i]);
        } else {
            REQUIRE(r0.gt.values.data()[i] == 0.0f);
        }
    }

    auto all = load_dataset<float>(dir.string());
    REQUIRE(all.size() == 2);
    REQUIRE(bit_equal(all[1].gt.values, s1.gt.values));

    REQUIRE_THROWS_WITH(load_dataset<float>((dir / "nowhere").string()),
                        Catch::Matchers::ContainsSubstring("missing directory"));
}

TEST_CASE("stacking samples concatenates along the batch") {
    auto a = generate_random_dot<float>(61, 64, 64, 6, 2);
    auto b = generate_random_dot<float>(62, 64, 64, 6, 2);
    auto s = stack_samples<float>({a, b});
    REQUIRE(s.left.shape() == make_shape(2, 3, 64, 64));
    REQUIRE(s.gt.values.shape() == make_shape(2, 1, 64, 64));
    REQUIRE(s.left.at(0, 1, 7, 9) == a.left.at(0, 1, 7, 9));
    REQUIRE(s.left.at(1, 1, 7, 9) == b.left.at(0, 1, 7, 9));
    REQUIRE(s.gt.values.at(1, 0, 3, 4) == b.gt.values.at(0, 0, 3, 4));

    auto small = generate_random_dot<float>(63, 32, 64, 6, 2);
    REQUIRE_THROWS_WITH(stack_samples<float>({a, small}),
                        Catch::Matchers::ContainsSubstring("mixed shapes"));
    REQUIRE_THROWS_AS(stack_samples<float>({}), std::invalid_argument);
}

TEST_CASE("checkpoint round-trips parameters, moments and bookkeeping") {
    const fs::path dir = temp_dir("checkpoint");
    const std::string path = (dir / "run.msfn").string();

    Checkpoint<float> ck;
    ck.config.width_multiplier = 0.25;
    ck.config.lr_boundaries = {100, 200};
    ck.config.loss_weights = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 1.0, 1.0, 1.0};
    ck.config.dataset_dir = "some/dir";
    ck.iteration = 123;

    std::mt19937 rng(71);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    auto fill = [&](Tensor<float>& t) {
        for (auto& v : t.data()) v = static_cast<float>(dist(rng));
    };
    fill(ck.params.create("alpha.weight", make_shape(4, 3, 3, 3)));
    fill(ck.params.create("alpha.bias", make_shape(1, 4, 1, 1)));
    fill(ck.params.create("beta.weight", make_shape(2, 4, 1, 1)));
    ck.adam.init(ck.params);
    ck.adam.step = 17;
    for (auto& t : ck.adam.m) fill(t);
    for (auto& t : ck.adam.v) fill(t);
    std::ostringstream state;
    state << rng;
    ck.rng_state = state.str();

    save_checkpoint(ck, path);
    auto back = load_checkpoint<float>(path);

    REQUIRE(back.config.serialize() == ck.config.serialize());
    REQUIRE(back.iteration == 123);
    REQUIRE(back.adam.step == 17);
    REQUIRE(back.rng_state == ck.rng_state);
    REQUIRE(back.params.names() == ck.params.names());
    for (size_t i = 0; i < ck.params.size(); ++i) {
        REQUIRE(bit_equal(back.params.at(i), ck.params.at(i)));
        REQUIRE(bit_equal(back.adam.m[i], ck.adam.m[i]));
        REQUIRE(bit_equal(back.adam.v[i], ck.adam.v[i]));
    }

    {
        std::ofstream out((dir / "junk.msfn").string(), std::ios::binary);
        out << "not a checkpoint";
    }
    REQUIRE_THROWS_WITH(load_checkpoint<float>((dir / "junk.msfn").string()),
                        Catch::Matchers::ContainsSubstring("bad magic"));
    REQUIRE_THROWS_WITH(load_checkpoint<float>((dir / "absent.msfn").string()),
                        Catch::Matchers::ContainsSubstring("cannot open"));
}

TEST_CASE("config text round-trip preserves every field") {
    TrainConfig c;
    c.width_multiplier = 0.25;
    c.height = 128;
    c.width = 256;
    c.max_displacement = 16;
    c.fine_displacement = 6;
    c.stack_count = 2;
    c.guidance_enabled = false;
    c.add_local_prior_to_sgrm = true;
    c.learning_rate = 2e-4;
    c.lr_halve_every = 500;
    c.lr_boundaries = {100, 250, 900};
    c.iterations = 42;
    c.batch_size = 3;
    c.seed = 7;
    c.loss_weights = {1, 1, 1, 1, 1, 1, 2, 2};
    c.dataset_dir = "data/train";
    c.checkpoint_path = "out/run.msfn";
    c.validate();

    const TrainConfig back = TrainConfig::from_text(c.serialize());
    REQUIRE(back.serialize() == c.serialize());
    REQUIRE(back.lr_boundaries == c.lr_boundaries);
    REQUIRE(back.loss_weights == c.loss_weights);
    REQUIRE(back.guidance_enabled == false);
}

TEST_CASE("config accepts rational multipliers, comments and blanks") {
    TrainConfig c = TrainConfig::from_text(
        "# a comment\n"
        "\n"
        "width_multiplier = 1/8\n"
        "  learning_rate=0.001  \n");
    REQUIRE(c.width_multiplier == 0.125);
    REQUIRE(c.learning_rate == 0.001);

    REQUIRE(TrainConfig::from_text("width_multiplier=0.5\n").width_multiplier == 0.5);
}

TEST_CASE("config parse errors carry the line number") {
    REQUIRE_THROWS_WITH(TrainConfig::from_text("height=64\nwhat is this\n"),
                        Catch::Matchers::ContainsSubstring("line 2 is not key=value"));
    REQUIRE_THROWS_WITH(TrainConfig::from_text("no_such_key=1\n"),
                        Catch::Matchers::ContainsSubstring("unknown key 'no_such_key'"));
    REQUIRE_THROWS_WITH(TrainConfig::from_text("guidance_enabled=maybe\n"),
                        Catch::Matchers::ContainsSubstring("bad boolean"));
    REQUIRE_THROWS_WITH(TrainConfig::from_text("width_multiplier=1/0\n"),
                        Catch::Matchers::ContainsSubstring("bad multiplier"));
    REQUIRE_THROWS_WITH(TrainConfig::from_text("lr_boundaries=10,x,30\n"),
                        Catch::Matchers::ContainsSubstring("bad list entry"));
    REQUIRE_THROWS_WITH(TrainConfig::from_text("iterations=soon\n"),
                        Catch::Matchers::ContainsSubstring("bad integer"));
}

TEST_CASE("config validation rejects inconsistent settings") {
    TrainConfig c;
    c.height = 100;
    REQUIRE_THROWS_WITH(c.validate(),
                        Catch::Matchers::ContainsSubstring("divisible by 64"));
    c = TrainConfig{};
    c.learning_rate = 0.0;
    REQUIRE_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.loss_weights = {1.0, 2.0};
    REQUIRE_THROWS_WITH(c.validate(),
                        Catch::Matchers::ContainsSubstring("expected 9 loss weights, got 2"));
    c = TrainConfig{};
    c.supervise_64 = true;
    REQUIRE(c.supervision_count() == 10);
    c.loss_weights = std::vector<double>(10, 0.1);
    REQUIRE_NOTHROW(c.validate());
}

TEST_CASE("resolved loss weights default to a uniform split") {
    TrainConfig c;
    const auto w = c.resolved_loss_weights<float>();
    REQUIRE(w.size() == 9);
    for (float v : w) REQUIRE(v == Catch::Approx(1.0 / 9.0));
    c.loss_weights = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    REQUIRE(c.resolved_loss_weights<float>()[8] == 9.0f);
}

#pragma once

#include "msfnet/checkpoint.hpp"
#include "msfnet/config.hpp"
#include "msfnet/data.hpp"
#include "msfnet/dataset.hpp"
#include "msfnet/gradcheck.hpp"
#include "msfnet/image_io.hpp"
#include "msfnet/msfm.hpp"
#include "msfnet/network.hpp"
#include "msfnet/nn_ops.hpp"
#include "msfnet/optim.hpp"
#include "msfnet/params.hpp"
#include "msfnet/pfm.hpp"
#include "msfnet/schm.hpp"
#include "msfnet/sgrm.hpp"
#include "msfnet/stereo_ops.hpp"
#include "msfnet/tape.hpp"
#include "msfnet/tensor.hpp"
#include "msfnet/trainer.hpp"

#pragma once

// Umbrella header.

#include "iprnet/core/autodiff.hpp"
#include "iprnet/core/errors.hpp"
#include "iprnet/core/nn.hpp"
#include "iprnet/core/rng.hpp"
#include "iprnet/core/tensor.hpp"
#include "iprnet/data/dataset.hpp"
#include "iprnet/data/episode.hpp"
#include "iprnet/data/mask.hpp"
#include "iprnet/data/shapes.hpp"
#include "iprnet/eval/ablation.hpp"
#include "iprnet/eval/evaluation.hpp"
#include "iprnet/io/checkpoint.hpp"
#include "iprnet/io/config_file.hpp"
#include "iprnet/io/dataset_io.hpp"
#include "iprnet/io/png.hpp"
#include "iprnet/loss/losses.hpp"
#include "iprnet/loss/rcm_loss.hpp"
#include "iprnet/model/decoder.hpp"
#include "iprnet/model/encoder.hpp"
#include "iprnet/model/model.hpp"
#include "iprnet/model/rcm.hpp"
#include "iprnet/proto/prototypes.hpp"
#include "iprnet/train/optim.hpp"
#include "iprnet/train/trainer.hpp"

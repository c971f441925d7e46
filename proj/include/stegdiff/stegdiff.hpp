#pragma once

// Umbrella header for the diffusion-steganography library.

#include "stegdiff/analysis.hpp"
#include "stegdiff/channels.hpp"
#include "stegdiff/codec.hpp"
#include "stegdiff/csv.hpp"
#include "stegdiff/errors.hpp"
#include "stegdiff/gaussianity.hpp"
#include "stegdiff/optimizer.hpp"
#include "stegdiff/pipeline.hpp"
#include "stegdiff/prng.hpp"
#include "stegdiff/schedule.hpp"
#include "stegdiff/score_model.hpp"
#include "stegdiff/solver.hpp"
#include "stegdiff/tensor.hpp"

#pragma once

#include "folioseg/error.hpp"
#include "folioseg/experiments.hpp"
#include "folioseg/fcn.hpp"
#include "folioseg/image.hpp"
#include "folioseg/manifest.hpp"
#include "folioseg/metrics.hpp"
#include "folioseg/palette.hpp"
#include "folioseg/pipeline.hpp"
#include "folioseg/pixmap_io.hpp"
#include "folioseg/postprocess.hpp"
#include "folioseg/preprocess.hpp"
#include "folioseg/random.hpp"
#include "folioseg/synthetic.hpp"
#include "folioseg/tensor.hpp"
#include "folioseg/training.hpp"

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gsdiff/baseline.hpp"
#include "gsdiff/change_head.hpp"
#include "gsdiff/cloud_io.hpp"
#include "gsdiff/config.hpp"
#include "gsdiff/error.hpp"
#include "gsdiff/eval.hpp"
#include "gsdiff/frames.hpp"
#include "gsdiff/image_io.hpp"
#include "gsdiff/math.hpp"
#include "gsdiff/partition.hpp"
#include "gsdiff/pipeline.hpp"
#include "gsdiff/pose.hpp"
#include "gsdiff/pose_io.hpp"
#include "gsdiff/raster.hpp"
#include "gsdiff/scene.hpp"
#include "gsdiff/segmentation.hpp"

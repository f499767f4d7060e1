#pragma once

#include "fishlen/calibration.hpp"
#include "fishlen/camera.hpp"
#include "fishlen/centerline.hpp"
#include "fishlen/dataset.hpp"
#include "fishlen/error.hpp"
#include "fishlen/eval_len.hpp"
#include "fishlen/eval_seg.hpp"
#include "fishlen/homography.hpp"
#include "fishlen/hull.hpp"
#include "fishlen/mask.hpp"
#include "fishlen/pipeline.hpp"
#include "fishlen/rng.hpp"
#include "fishlen/skeleton.hpp"
#include "fishlen/synth.hpp"
#include "fishlen/types.hpp"

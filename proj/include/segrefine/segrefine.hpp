#pragma once

#include "segrefine/errors.hpp"
#include "segrefine/tensor.hpp"
#include "segrefine/nn.hpp"
#include "segrefine/refiner.hpp"
#include "segrefine/grad_check.hpp"
#include "segrefine/segmentation.hpp"
#include "segrefine/frame.hpp"
#include "segrefine/sidecar.hpp"
#include "segrefine/metrics.hpp"
#include "segrefine/trainer.hpp"
#include "segrefine/video_io.hpp"
#include "segrefine/synthetic.hpp"

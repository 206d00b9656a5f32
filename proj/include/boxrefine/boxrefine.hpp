#pragma once

#include "boxrefine/box_noise.hpp"
#include "boxrefine/bundle_io.hpp"
#include "boxrefine/camera.hpp"
#include "boxrefine/candidates.hpp"
#include "boxrefine/confidence.hpp"
#include "boxrefine/error.hpp"
#include "boxrefine/eval.hpp"
#include "boxrefine/oracle_segmenter.hpp"
#include "boxrefine/parallel.hpp"
#include "boxrefine/pipeline.hpp"
#include "boxrefine/pipeline_config.hpp"
#include "boxrefine/prompting.hpp"
#include "boxrefine/remote_segmenter.hpp"
#include "boxrefine/rng.hpp"
#include "boxrefine/scene.hpp"
#include "boxrefine/superpoints.hpp"
#include "boxrefine/synth.hpp"
#include "boxrefine/view_select.hpp"

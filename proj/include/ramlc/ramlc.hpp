// Umbrella header.
#pragma once

#include "ramlc/adam.hpp"
#include "ramlc/checkpoint.hpp"
#include "ramlc/encoder.hpp"
#include "ramlc/grad_check.hpp"
#include "ramlc/metrics.hpp"
#include "ramlc/model_config.hpp"
#include "ramlc/param_store.hpp"
#include "ramlc/ra_model.hpp"
#include "ramlc/repository.hpp"
#include "ramlc/rng.hpp"
#include "ramlc/sweep.hpp"
#include "ramlc/synth.hpp"
#include "ramlc/tape.hpp"
#include "ramlc/tensor.hpp"
#include "ramlc/text.hpp"
#include "ramlc/trainer.hpp"

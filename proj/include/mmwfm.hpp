#pragma once

#include "mmwfm/backbone.hpp"
#include "mmwfm/checkpoint.hpp"
#include "mmwfm/config.hpp"
#include "mmwfm/core.hpp"
#include "mmwfm/dataset_io.hpp"
#include "mmwfm/embedding.hpp"
#include "mmwfm/finetuner.hpp"
#include "mmwfm/layers.hpp"
#include "mmwfm/masking.hpp"
#include "mmwfm/model.hpp"
#include "mmwfm/objectives.hpp"
#include "mmwfm/optim.hpp"
#include "mmwfm/pretrainer.hpp"
#include "mmwfm/render.hpp"
#include "mmwfm/samples.hpp"
#include "mmwfm/signalgen.hpp"
#include "mmwfm/tasks.hpp"
#include "mmwfm/tokenizer.hpp"

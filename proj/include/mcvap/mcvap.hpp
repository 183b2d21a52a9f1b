// mcvap/mcvap.hpp

// Copyright 2026  The mcvap Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "mcvap/audio.hpp"
#include "mcvap/codebook.hpp"
#include "mcvap/dataset.hpp"
#include "mcvap/dialogue.hpp"
#include "mcvap/endpointing.hpp"
#include "mcvap/features.hpp"
#include "mcvap/model.hpp"
#include "mcvap/noise_mix.hpp"
#include "mcvap/session.hpp"
#include "mcvap/stats.hpp"
#include "mcvap/streaming.hpp"
#include "mcvap/train.hpp"

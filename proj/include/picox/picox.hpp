/* Copyright 2026 The PICOX Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include "picox/augment.hpp"
#include "picox/corpus.hpp"
#include "picox/embedder.hpp"
#include "picox/errors.hpp"
#include "picox/evaluator.hpp"
#include "picox/linear.hpp"
#include "picox/localizer.hpp"
#include "picox/pipeline.hpp"
#include "picox/spanclass.hpp"
#include "picox/synthetic.hpp"

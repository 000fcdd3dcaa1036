/* Copyright 2026 The UCM-Net Engine Authors. All Rights Reserved.

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

#include "ucmnet/config.hpp"
#include "ucmnet/conv.hpp"
#include "ucmnet/data.hpp"
#include "ucmnet/layers.hpp"
#include "ucmnet/loss.hpp"
#include "ucmnet/metrics.hpp"
#include "ucmnet/model.hpp"
#include "ucmnet/norm.hpp"
#include "ucmnet/ops.hpp"
#include "ucmnet/optim.hpp"
#include "ucmnet/profiler.hpp"
#include "ucmnet/seed.hpp"
#include "ucmnet/serialize.hpp"
#include "ucmnet/spatial.hpp"
#include "ucmnet/tensor.hpp"
#include "ucmnet/train.hpp"

/*
 * Copyright 2026 The apknn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "apknn/bits.hpp"
#include "apknn/dataset_io.hpp"
#include "apknn/fabric.hpp"
#include "apknn/image_format.hpp"
#include "apknn/knn_compiler.hpp"
#include "apknn/oracle.hpp"
#include "apknn/perf_model.hpp"
#include "apknn/pipeline.hpp"
#include "apknn/report_table.hpp"
#include "apknn/reproduce.hpp"
#include "apknn/resource_model.hpp"
#include "apknn/run_config.hpp"
#include "apknn/simulator.hpp"
#include "apknn/spatial_index.hpp"
#include "apknn/stream_codec.hpp"
#include "apknn/stream_layout.hpp"
#include "apknn/symbol_class.hpp"
#include "apknn/validate.hpp"

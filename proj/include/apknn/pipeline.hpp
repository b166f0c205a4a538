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

#include <span>
#include <stdexcept>
#include <vector>

#include "apknn/knn_compiler.hpp"
#include "apknn/simulator.hpp"
#include "apknn/stream_codec.hpp"

namespace apknn {

/// Per-partition images for a whole dataset, partitioned at the option's
/// board capacity.
inline std::vector<compiler::BoardImage> compile_dataset(const BitMatrix& data, const compiler::CompileOptions& opt) {
    if (data.rows() == 0) throw std::invalid_argument("cannot compile an empty dataset");
    std::vector<compiler::BoardImage> images;
    for (const auto& part : compiler::partition_dataset(data, opt.capacity)) images.push_back(compiler::compile(part, opt));
    return images;
}

/// Candidate lists of one board image: encode, run the simulator, decode.
inline std::vector<codec::KnnResult> query_image(const compiler::BoardImage& image, const codec::QueryBatch& batch,
                                                 std::size_t k) {
    if (batch.dims() != image.layout.dims)
        throw std::invalid_argument("query dimensionality " + std::to_string(batch.dims()) +
                                    " does not match the image's " + std::to_string(image.layout.dims));
    const auto stream = codec::encode(batch, image.layout);
    const auto events = fabric::simulate(image.automaton, stream.symbols, image.layout.options.fabric());
    return codec::decode(events, stream, image.layout, k);
}

/// Reconfiguration loop: every image sees every query, results are merged
/// per query and returned in batch order.
inline std::vector<codec::KnnResult> run_query(std::span<const compiler::BoardImage> images,
                                               const codec::QueryBatch& batch, std::size_t k) {
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    if (images.empty()) throw std::invalid_argument("no board images to query");
    std::vector<std::vector<codec::KnnResult>> partials;
    partials.reserve(images.size());
    for (const auto& img : images) partials.push_back(query_image(img, batch, k));
    return codec::merge_batches(partials, k);
}

}  // namespace apknn

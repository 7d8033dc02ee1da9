// Copyright 2026 The resunet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <iosfwd>

#include "resunet/tensor.hpp"

namespace resunet {

// NCT1 container: "NCT1", u32 LE rank, rank x u32 LE extents, f32 LE payload.

void write_nct(std::ostream& os, const Tensor<float>& t);
Tensor<float> read_nct(std::istream& is);

void save_nct(const std::filesystem::path& path, const Tensor<float>& t);
Tensor<float> load_nct(const std::filesystem::path& path);

}  // namespace resunet

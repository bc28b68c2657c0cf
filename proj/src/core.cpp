// Copyright 2026 The fairkd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fairkd/core.hpp"

namespace fairkd {

Matrix normalize_columns(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) out.col(j) = l2_normalize(m.col(j));
  return out;
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) out.row(i) = l2_normalize(m.row(i).transpose()).transpose();
  return out;
}

}  // namespace fairkd

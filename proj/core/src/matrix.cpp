#include "nazr/matrix.hpp"

namespace nazr {

Matrix to_matrix(const DescriptorSet& ds) {
  Matrix m(ds.size(), ds.dim);
  for (std::size_t i = 0; i < ds.values.size(); ++i) m.data[i] = ds.values[i];
  return m;
}

}  // namespace nazr

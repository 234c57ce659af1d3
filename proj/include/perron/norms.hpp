#pragma once

#include "perron/types.hpp"

namespace perron {

// Vector norm matching the cocycle's norm kind.
double vector_norm(const Vec& v, NormKind kind);

// Induced operator norm of a square matrix.  MaxNorm uses the exact
// maximum absolute row sum; Euclidean returns the largest singular value
// (accurate well below 1e-12 relative error).
double operator_norm(const Mat& m, NormKind kind);

} // namespace perron

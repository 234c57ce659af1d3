#include "perron/norms.hpp"

#include <Eigen/SVD>

namespace perron {

double vector_norm(const Vec& v, NormKind kind) {
    if (v.size() == 0) return 0.0;
    if (kind == NormKind::MaxNorm)
        return v.lpNorm<Eigen::Infinity>();
    return v.norm();
}

double operator_norm(const Mat& m, NormKind kind) {
    if (m.rows() != m.cols())
        throw std::invalid_argument("operator_norm: matrix must be square");
    if (m.size() == 0) return 0.0;
    if (kind == NormKind::MaxNorm)
        return m.cwiseAbs().rowwise().sum().maxCoeff();
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues()(0);
}

} // namespace perron

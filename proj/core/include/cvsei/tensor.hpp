#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace cvsei {

using cxd = std::complex<double>;

// Complex-valued [length x channels] tensor, row-major (all channels of one
// time step are adjacent).
struct CxTensor {
    std::size_t len = 0;
    std::size_t ch = 0;
    std::vector<cxd> v;

    CxTensor() = default;
    CxTensor(std::size_t l, std::size_t c) : len(l), ch(c), v(l * c) {}

    cxd& at(std::size_t t, std::size_t c) { return v[t * ch + c]; }
    const cxd& at(std::size_t t, std::size_t c) const { return v[t * ch + c]; }
    std::size_t size() const { return v.size(); }
};

// Dense real matrix, row-major.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    const double& at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
    double* row(std::size_t r) { return v.data() + r * cols; }
    const double* row(std::size_t r) const { return v.data() + r * cols; }
    std::size_t size() const { return v.size(); }
};

}  // namespace cvsei

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cntnn {

// Row-major so that one sample is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thrown when training produces a non-finite loss or parameter.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int epoch, const std::string& what)
        : std::runtime_error(what), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

inline std::string shape_str(Index rows, Index cols) {
    return "[" + std::to_string(rows) + " x " + std::to_string(cols) + "]";
}

} // namespace cntnn

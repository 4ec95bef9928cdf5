#pragma once

// Shared helpers for the unit tests: an independent central-difference
// gradient oracle and a scratch-directory guard.

#include "oodkit/tensor.hpp"

#include <filesystem>
#include <functional>
#include <string>

namespace testsup {

/// Central finite differences of a scalar function of one matrix input,
/// entry by entry. Step defaults to the same size the tolerance story of
/// the autodiff checks is built around.
inline oodkit::Matrix numeric_grad(const std::function<double(const oodkit::Matrix&)>& f,
                                   oodkit::Matrix x, double step = 1e-4) {
    oodkit::Matrix g(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double keep = x(i, j);
            x(i, j) = keep + step;
            const double up = f(x);
            x(i, j) = keep - step;
            const double down = f(x);
            x(i, j) = keep;
            g(i, j) = (up - down) / (2.0 * step);
        }
    }
    return g;
}

inline double max_rel_err(const oodkit::Matrix& got, const oodkit::Matrix& want) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < got.rows(); ++i) {
        for (Eigen::Index j = 0; j < got.cols(); ++j) {
            const double scale = std::max({std::abs(got(i, j)), std::abs(want(i, j)), 1.0});
            worst = std::max(worst, std::abs(got(i, j) - want(i, j)) / scale);
        }
    }
    return worst;
}

/// Creates a fresh directory under the system temp root and removes it on
/// scope exit.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        root_ = std::filesystem::temp_directory_path() /
                ("oodkit-test-" + tag + "-" + std::to_string(::getpid()));
        std::filesystem::remove_all(root_);
        std::filesystem::create_directories(root_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(root_, ec);
    }
    const std::filesystem::path& path() const { return root_; }
    std::filesystem::path file(const std::string& name) const { return root_ / name; }

  private:
    std::filesystem::path root_;
};

}  // namespace testsup

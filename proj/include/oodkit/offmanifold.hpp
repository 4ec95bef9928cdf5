#pragma once

#include "oodkit/cvae.hpp"
#include "oodkit/data_io.hpp"
#include "oodkit/ood_batch.hpp"
#include "oodkit/rng.hpp"
#include "oodkit/tensor.hpp"

#include <cstdint>

namespace oodkit {

/// Jacobian of the decoder with respect to the latent code, evaluated at the
/// encoder's mean code for base_point. Columns span the tangent space of the
/// decoded data manifold at that point.
struct JacobianMatrix {
    Matrix matrix;  // input_dim x latent_dim
    Vector base_point;
    int label = 0;
};

/// Orthonormal basis of the left null space of a Jacobian: directions the
/// decoder cannot move along, i.e. normals to the data manifold.
struct NullspaceBasis {
    Matrix basis;  // input_dim x k, k = input_dim - rank_used
    int rank_used = 0;
    double sv_threshold = 0.0;  // absolute cutoff actually applied
    double sigma_max = 0.0;
    bool degenerate = false;  // true when the Jacobian was identically zero

    int k() const { return static_cast<int>(basis.cols()); }
};

/// Exact decoder Jacobian at z = encoder mean of (x, label), one directional
/// differentiation pass per latent axis.
JacobianMatrix decoder_jacobian(const CvaeModel& model, const Vector& x, int label);

/// Orthonormal basis of null(J^T) via singular value decomposition; the
/// numerical rank counts singular values above sv_threshold_rel * sigma_max.
NullspaceBasis left_nullspace_basis(const JacobianMatrix& jac, double sv_threshold_rel = 1e-6);

/// Uniformly random unit vector in span(basis): Gaussian coefficients over
/// the orthonormal columns, normalized.
Vector sample_normal_direction(const NullspaceBasis& basis, Rng& rng);

struct Type1Config {
    double beta_min = 0.1;
    double beta_max = 1.0;
    int per_sample = 1;
    double sv_threshold_rel = 1e-6;
    // Off-manifold points may leave [0,1]; clamping would silently shrink
    // the perturbation norm, so it is opt-in.
    bool clamp_unit = false;
};

/// Type I OOD batch: for every dataset row, per_sample perturbations
/// x + beta * v with beta ~ U[beta_min, beta_max] and v a random unit normal
/// direction. Each emitted sample draws from its own RNG stream derived from
/// (master_seed, flat sample index), so results are independent of
/// evaluation order.
OodBatch generate_type1(const CvaeModel& model, const LabeledDataset& data,
                        const Type1Config& config, std::uint64_t master_seed);

}  // namespace oodkit

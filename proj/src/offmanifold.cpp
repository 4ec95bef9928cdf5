#include "oodkit/offmanifold.hpp"

#include "oodkit/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <random>
#include <string>

namespace oodkit {

JacobianMatrix decoder_jacobian(const CvaeModel& model, const Vector& x, int label) {
    model.validate();
    if (x.size() != model.input_dim) {
        throw DimensionError("decoder_jacobian: x has " + std::to_string(x.size()) +
                             " entries, want " + std::to_string(model.input_dim));
    }
    if (label < 0 || label >= model.n_classes) {
        throw ContractError("decoder_jacobian: label " + std::to_string(label) + " outside [0," +
                            std::to_string(model.n_classes) + ")");
    }
    if (!model.encoder.finite() || !model.decoder.finite()) {
        throw NumericError("decoder_jacobian: model holds non-finite parameters");
    }

    const auto [mu, logvar] = encode(model, x, label);
    Vector dec_in = Vector::Zero(model.latent_dim + model.n_classes);
    dec_in.head(model.latent_dim) = mu;
    dec_in(model.latent_dim + label) = 1.0;

    JacobianMatrix jac;
    jac.matrix.resize(model.input_dim, model.latent_dim);
    jac.base_point = x;
    jac.label = label;
    Vector tangent = Vector::Zero(model.latent_dim + model.n_classes);
    for (int j = 0; j < model.latent_dim; ++j) {
        tangent(j) = 1.0;
        const auto [value, dvalue] = model.decoder.jvp(dec_in, tangent);
        jac.matrix.col(j) = dvalue;
        tangent(j) = 0.0;
    }
    if (!jac.matrix.allFinite()) {
        throw NumericError("decoder_jacobian: non-finite Jacobian entries");
    }
    return jac;
}

NullspaceBasis left_nullspace_basis(const JacobianMatrix& jac, double sv_threshold_rel) {
    const Matrix& J = jac.matrix;
    if (!J.allFinite()) throw NumericError("left_nullspace_basis: Jacobian is not finite");
    if (!(sv_threshold_rel > 0.0)) {
        throw ContractError("left_nullspace_basis: threshold must be positive");
    }
    const auto D = J.rows();
    const auto d = J.cols();

    NullspaceBasis out;
    Eigen::BDCSVD<Matrix> svd(J, Eigen::ComputeThinU);
    out.sigma_max = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
    out.sv_threshold = sv_threshold_rel * out.sigma_max;

    if (out.sigma_max == 0.0) {
        // Identically zero Jacobian: every direction is normal.
        out.rank_used = 0;
        out.basis = Matrix::Identity(D, D);
        out.degenerate = true;
        return out;
    }

    int rank = 0;
    while (rank < svd.singularValues().size() && svd.singularValues()(rank) > out.sv_threshold) {
        ++rank;
    }
    out.rank_used = rank;

    // null(J^T) = sub-threshold left singular vectors plus the orthogonal
    // complement of the full thin U (left singular vectors of the zero
    // singular values), obtained by completing U to an orthonormal basis.
    const Matrix& U = svd.matrixU();  // D x d
    const auto n_sub = static_cast<int>(d) - rank;
    const auto n_complement = static_cast<int>(D - d);
    out.basis.resize(D, n_sub + n_complement);
    if (n_sub > 0) out.basis.leftCols(n_sub) = U.rightCols(n_sub);
    if (n_complement > 0) {
        // Apply the Householder reflectors to the trailing identity columns
        // only; forming the full D x D orthogonal factor would be wasteful.
        Matrix tail = Matrix::Zero(D, n_complement);
        for (int j = 0; j < n_complement; ++j) tail(d + j, j) = 1.0;
        out.basis.rightCols(n_complement) =
            Eigen::HouseholderQR<Matrix>(U).householderQ() * tail;
    }
    return out;
}

Vector sample_normal_direction(const NullspaceBasis& basis, Rng& rng) {
    if (basis.k() == 0) {
        throw ContractError("sample_normal_direction: nullspace is empty (full-rank square case)");
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector coeff(basis.k());
    Vector v;
    double norm = 0.0;
    do {
        for (int i = 0; i < basis.k(); ++i) coeff(i) = normal(rng);
        v = basis.basis * coeff;
        norm = v.norm();
    } while (norm < 1e-12);
    return v / norm;
}

OodBatch generate_type1(const CvaeModel& model, const LabeledDataset& data,
                        const Type1Config& config, std::uint64_t master_seed) {
    model.validate();
    data.validate();
    if (data.n() == 0) throw ContractError("generate_type1: empty dataset");
    if (data.dim() != model.input_dim) {
        throw DimensionError("generate_type1: data dim " + std::to_string(data.dim()) +
                             " != input_dim " + std::to_string(model.input_dim));
    }
    if (!(config.beta_min <= config.beta_max)) {
        throw ContractError("generate_type1: beta_min must not exceed beta_max");
    }
    if (config.beta_min < 0.0) throw ContractError("generate_type1: beta must be nonnegative");
    if (config.per_sample <= 0) throw ContractError("generate_type1: per_sample must be positive");

    OodBatch batch;
    const int total = data.n() * config.per_sample;
    batch.samples.resize(total, data.dim());
    batch.types.assign(static_cast<std::size_t>(total), OodType::type1);
    batch.source_class.resize(static_cast<std::size_t>(total));
    batch.beta.resize(static_cast<std::size_t>(total));
    batch.source_index.resize(static_cast<std::size_t>(total));
    if (config.beta_min == 0.0 && config.beta_max == 0.0) {
        batch.warnings.push_back("beta range is [0,0]; emitted samples equal their sources");
    }

    const std::uint64_t stage_seed = derive_seed(master_seed, "type1");
    for (int i = 0; i < data.n(); ++i) {
        const int label = data.labels[static_cast<std::size_t>(i)];
        if (label < 0) {
            throw ContractError("generate_type1: sample " + std::to_string(i) +
                                " is unlabeled; conditioning needs a class");
        }
        const Vector x = data.samples.row(i).transpose();
        const JacobianMatrix jac = decoder_jacobian(model, x, label);
        const NullspaceBasis basis = left_nullspace_basis(jac, config.sv_threshold_rel);
        if (basis.degenerate) {
            batch.warnings.push_back("sample " + std::to_string(i) +
                                     ": zero Jacobian, normal directions are unconstrained");
        }
        for (int s = 0; s < config.per_sample; ++s) {
            const int out_row = i * config.per_sample + s;
            Rng rng = derive_rng(stage_seed, static_cast<std::uint64_t>(out_row));
            const Vector v = sample_normal_direction(basis, rng);
            const double beta =
                std::uniform_real_distribution<double>(config.beta_min, config.beta_max)(rng);
            Vector x_tilde = x + beta * v;
            if (config.clamp_unit) x_tilde = x_tilde.cwiseMax(0.0).cwiseMin(1.0);
            batch.samples.row(out_row) = x_tilde.transpose();
            batch.source_class[static_cast<std::size_t>(out_row)] =
                data.labels[static_cast<std::size_t>(i)];
            batch.beta[static_cast<std::size_t>(out_row)] = beta;
            batch.source_index[static_cast<std::size_t>(out_row)] = i;
        }
    }
    return batch;
}

}  // namespace oodkit

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace ergowatch::mlkit {

/// Affine scorer: score = w·x + bias.
struct LinearModel {
    Eigen::VectorXd w;
    double bias = 0.0;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(w.size()); }
    bool empty() const noexcept { return w.size() == 0; }
};

struct Prediction {
    double score = 0.0;
    int label = -1;  // +1 when score > 0, else -1
};

Prediction predict(const LinearModel& model, const Eigen::VectorXd& x);

struct SvmOptions {
    double lambda = 0.01;
    int epochs = 40;
    std::uint64_t seed = 1;
    // Train on per-dimension standardized inputs; the scaling is folded back
    // into the returned weights.
    bool standardize = true;
    // Called after every epoch with the regularized hinge objective of the
    // averaged iterate, measured on the (possibly standardized) training set.
    std::function<void(int epoch, double objective)> on_epoch;
};

/// Primal stochastic subgradient (Pegasos) on the regularized hinge loss,
/// returning the averaged iterate. Labels must be -1 or +1.
LinearModel train_linear_svm(const std::vector<Eigen::VectorXd>& samples, const std::vector<int>& labels,
                             const SvmOptions& options = {});

/// (λ/2)(|w|² + bias²) + mean hinge loss.
double svm_objective(const LinearModel& model, const std::vector<Eigen::VectorXd>& samples,
                     const std::vector<int>& labels, double lambda);

/// One-vs-rest ensemble. predict() is the argmax of raw scores; ties go to
/// the lowest class index.
struct MulticlassModel {
    std::vector<LinearModel> models;
    std::vector<int> labels;

    std::size_t dim() const noexcept { return models.empty() ? 0 : models.front().dim(); }
    bool empty() const noexcept { return models.empty(); }
    Eigen::VectorXd scores(const Eigen::VectorXd& x) const;
    int predict(const Eigen::VectorXd& x) const;
};

MulticlassModel train_one_vs_rest(const std::vector<Eigen::VectorXd>& samples, const std::vector<int>& labels,
                                  const SvmOptions& options = {});

struct PcaBasis {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;  // dim × k, orthonormal columns
    Eigen::VectorXd eigenvalues;  // k, descending

    Eigen::VectorXd project(const Eigen::VectorXd& x) const;
    Eigen::VectorXd reconstruct(const Eigen::VectorXd& coeffs) const;
};

/// Rows of `data` are samples. Covariance is normalized by M (population).
PcaBasis pca_fit(const Eigen::MatrixXd& data, std::size_t k);

/// argmin |A b - y|² + ridge |b|², via the normal equations and a Cholesky
/// factorization. Throws RankError when ridge == 0 and A has rank < cols.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double ridge = 0.0);

struct NormalValues {
    double pdf = 0.0;
    double cdf = 0.0;
};

NormalValues std_normal(double x);

// Persistence: {"format_version": 1, "kind": "linear" | "multiclass", ...}
std::string to_json(const LinearModel& model);
std::string to_json(const MulticlassModel& model);
LinearModel linear_model_from_json(std::string_view text);
MulticlassModel multiclass_model_from_json(std::string_view text);

}  // namespace ergowatch::mlkit

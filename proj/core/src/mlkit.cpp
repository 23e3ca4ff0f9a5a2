#include "ergowatch/mlkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "ergowatch/error.hpp"
#include "json_util.hpp"

namespace ergowatch::mlkit {

using nlohmann::json;

Prediction predict(const LinearModel& model, const Eigen::VectorXd& x) {
    if (model.empty()) throw UntrainedError("linear model is untrained");
    if (x.size() != model.w.size())
        throw DimensionError("expected dimension " + std::to_string(model.w.size()) + ", got " +
                             std::to_string(x.size()));
    const double s = model.w.dot(x) + model.bias;
    return {s, s > 0.0 ? 1 : -1};
}

namespace {

void check_training_set(const std::vector<Eigen::VectorXd>& samples, const std::vector<int>& labels) {
    if (samples.empty()) throw TrainingError("no training samples");
    if (samples.size() != labels.size()) throw DimensionError("sample/label count mismatch");
    const auto dim = samples.front().size();
    if (dim < 1) throw DimensionError("samples must have dimension >= 1");
    for (const auto& s : samples)
        if (s.size() != dim) throw DimensionError("samples must share one dimension");
}

// Fisher-Yates with a fixed engine so orderings are reproducible across
// standard libraries.
void shuffle(std::vector<std::size_t>& order, std::mt19937_64& rng) {
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
}

}  // namespace

double svm_objective(const LinearModel& model, const std::vector<Eigen::VectorXd>& samples,
                     const std::vector<int>& labels, double lambda) {
    check_training_set(samples, labels);
    double hinge = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i)
        hinge += std::max(0.0, 1.0 - labels[i] * predict(model, samples[i]).score);
    return 0.5 * lambda * (model.w.squaredNorm() + model.bias * model.bias) +
           hinge / static_cast<double>(samples.size());
}

LinearModel train_linear_svm(const std::vector<Eigen::VectorXd>& samples, const std::vector<int>& labels,
                             const SvmOptions& options) {
    check_training_set(samples, labels);
    if (!(options.lambda > 0.0)) throw TrainingError("lambda must be > 0");
    if (options.epochs < 1) throw TrainingError("epochs must be >= 1");
    bool has_pos = false;
    bool has_neg = false;
    for (int y : labels) {
        if (y == 1) has_pos = true;
        else if (y == -1) has_neg = true;
        else throw TrainingError("labels must be -1 or +1");
    }
    if (!has_pos || !has_neg) throw TrainingError("training data must contain both classes");

    const auto dim = samples.front().size();
    const auto n = samples.size();

    Eigen::VectorXd offset = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(dim);
    if (options.standardize) {
        for (const auto& s : samples) offset += s;
        offset /= static_cast<double>(n);
        Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
        for (const auto& s : samples) var += (s - offset).cwiseAbs2();
        var /= static_cast<double>(n);
        for (Eigen::Index k = 0; k < dim; ++k) scale[k] = var[k] > 1e-24 ? std::sqrt(var[k]) : 1.0;
    }
    std::vector<Eigen::VectorXd> xs;
    xs.reserve(n);
    for (const auto& s : samples) xs.push_back((s - offset).cwiseQuotient(scale));

    // The bias is carried as a constant extra input so it shares the step size.
    const double lambda = options.lambda;
    const double radius = 1.0 / std::sqrt(lambda);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(dim + 1);
    Eigen::VectorXd avg = Eigen::VectorXd::Zero(dim + 1);
    Eigen::VectorXd x_aug(dim + 1);
    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::uint64_t t = 0;

    auto averaged = [&] {
        LinearModel m;
        m.w = avg.head(dim);
        m.bias = avg[dim];
        return m;
    };

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        shuffle(order, rng);
        for (std::size_t i : order) {
            ++t;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            x_aug.head(dim) = xs[i];
            x_aug[dim] = 1.0;
            const double margin = labels[i] * w.dot(x_aug);
            w *= 1.0 - eta * lambda;
            if (margin < 1.0) w += (eta * labels[i]) * x_aug;
            const double norm = w.norm();
            if (norm > radius) w *= radius / norm;
            avg += (w - avg) / static_cast<double>(t);
        }
        if (options.on_epoch) options.on_epoch(epoch, svm_objective(averaged(), xs, labels, lambda));
    }

    LinearModel internal = averaged();
    LinearModel out;
    out.w = internal.w.cwiseQuotient(scale);
    out.bias = internal.bias - out.w.dot(offset);
    if (!out.w.allFinite() || !std::isfinite(out.bias)) throw TrainingError("training diverged");
    return out;
}

Eigen::VectorXd MulticlassModel::scores(const Eigen::VectorXd& x) const {
    if (models.empty()) throw UntrainedError("multiclass model is untrained");
    Eigen::VectorXd s(static_cast<Eigen::Index>(models.size()));
    for (std::size_t k = 0; k < models.size(); ++k) s[static_cast<Eigen::Index>(k)] = mlkit::predict(models[k], x).score;
    return s;
}

int MulticlassModel::predict(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd s = scores(x);
    std::size_t best = 0;
    for (std::size_t k = 1; k < models.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const auto bb = static_cast<Eigen::Index>(best);
        if (s[kk] > s[bb] || (s[kk] == s[bb] && labels[k] < labels[best])) best = k;
    }
    return labels[best];
}

MulticlassModel train_one_vs_rest(const std::vector<Eigen::VectorXd>& samples, const std::vector<int>& labels,
                                  const SvmOptions& options) {
    check_training_set(samples, labels);
    std::vector<int> classes(labels);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.size() < 2) throw TrainingError("multiclass training needs at least two classes");

    MulticlassModel out;
    out.labels = classes;
    std::vector<int> binary(labels.size());
    for (std::size_t k = 0; k < classes.size(); ++k) {
        for (std::size_t i = 0; i < labels.size(); ++i) binary[i] = labels[i] == classes[k] ? 1 : -1;
        SvmOptions sub = options;
        sub.seed = options.seed + k;
        sub.on_epoch = nullptr;
        out.models.push_back(train_linear_svm(samples, binary, sub));
    }
    return out;
}

Eigen::VectorXd PcaBasis::project(const Eigen::VectorXd& x) const {
    if (x.size() != mean.size()) throw DimensionError("PCA input dimension mismatch");
    return components.transpose() * (x - mean);
}

Eigen::VectorXd PcaBasis::reconstruct(const Eigen::VectorXd& coeffs) const {
    if (coeffs.size() != components.cols()) throw DimensionError("PCA coefficient count mismatch");
    return mean + components * coeffs;
}

PcaBasis pca_fit(const Eigen::MatrixXd& data, std::size_t k) {
    const auto m = static_cast<std::size_t>(data.rows());
    const auto dim = static_cast<std::size_t>(data.cols());
    if (m < 2) throw TrainingError("PCA needs at least two samples");
    if (k < 1 || k > std::min(m, dim))
        throw DimensionError("PCA k must lie in [1, min(M, dim)] = [1, " + std::to_string(std::min(m, dim)) + "]");

    PcaBasis basis;
    basis.mean = data.colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.rowwise() - basis.mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw TrainingError("covariance eigendecomposition failed");

    const auto kk = static_cast<Eigen::Index>(k);
    basis.components.resize(static_cast<Eigen::Index>(dim), kk);
    basis.eigenvalues.resize(kk);
    for (Eigen::Index j = 0; j < kk; ++j) {
        const Eigen::Index src = static_cast<Eigen::Index>(dim) - 1 - j;  // ascending order from Eigen
        basis.components.col(j) = eig.eigenvectors().col(src);
        basis.eigenvalues[j] = std::max(0.0, eig.eigenvalues()[src]);
    }
    return basis;
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double ridge) {
    if (A.rows() < 1 || A.cols() < 1) throw DimensionError("least squares needs a non-empty design matrix");
    if (A.rows() != y.size()) throw DimensionError("design rows and target length differ");
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw DimensionError("ridge must be finite and >= 0");
    if (ridge == 0.0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
        if (qr.rank() < A.cols())
            throw RankError("design matrix has rank " + std::to_string(qr.rank()) + " < " +
                            std::to_string(A.cols()) + "; use ridge > 0");
    }
    Eigen::MatrixXd normal = A.transpose() * A;
    normal.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(normal);
    if (llt.info() != Eigen::Success) throw RankError("normal equations are not positive definite");
    return llt.solve(A.transpose() * y);
}

NormalValues std_normal(double x) {
    constexpr double inv_sqrt_2pi = 0.39894228040143267794;
    constexpr double inv_sqrt_2 = 0.70710678118654752440;
    return {inv_sqrt_2pi * std::exp(-0.5 * x * x), 0.5 * std::erfc(-x * inv_sqrt_2)};
}

namespace {

json linear_json(const LinearModel& m) {
    return {{"weights", std::vector<double>(m.w.data(), m.w.data() + m.w.size())}, {"bias", m.bias}};
}

LinearModel linear_from(const json& j, std::size_t dim) {
    LinearModel m;
    const auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != dim) throw SchemaError("weights length does not match dim");
    m.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    m.bias = j.at("bias").get<double>();
    return m;
}

json parse_model(std::string_view text, const char* kind) {
    json j = detail::parse_json(text, "model");
    if (j.value("format_version", 0) != 1) throw SchemaError("unsupported model format_version");
    if (j.value("kind", std::string{}) != kind) throw SchemaError(std::string("expected model kind '") + kind + "'");
    return j;
}

}  // namespace

std::string to_json(const LinearModel& model) {
    json j = linear_json(model);
    j["format_version"] = 1;
    j["kind"] = "linear";
    j["dim"] = model.dim();
    return j.dump(2);
}

std::string to_json(const MulticlassModel& model) {
    json models = json::array();
    for (const auto& m : model.models) models.push_back(linear_json(m));
    json j = {{"format_version", 1}, {"kind", "multiclass"}, {"dim", model.dim()},
              {"labels", model.labels}, {"models", std::move(models)}};
    return j.dump(2);
}

LinearModel linear_model_from_json(std::string_view text) {
    try {
        json j = parse_model(text, "linear");
        return linear_from(j, j.at("dim").get<std::size_t>());
    } catch (const json::exception& e) {
        throw SchemaError(std::string("linear model: ") + e.what());
    }
}

MulticlassModel multiclass_model_from_json(std::string_view text) {
    try {
        json j = parse_model(text, "multiclass");
        const auto dim = j.at("dim").get<std::size_t>();
        MulticlassModel m;
        m.labels = j.at("labels").get<std::vector<int>>();
        for (const auto& sub : j.at("models")) m.models.push_back(linear_from(sub, dim));
        if (m.labels.size() != m.models.size() || m.models.size() < 2)
            throw SchemaError("multiclass model needs >= 2 submodels matching its labels");
        return m;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("multiclass model: ") + e.what());
    }
}

}  // namespace ergowatch::mlkit

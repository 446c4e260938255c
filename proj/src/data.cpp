#include "mfuse/data.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>

#include "mfuse/errors.hpp"

namespace mfuse {

namespace {

template <class T>
const T& require(const std::optional<T>& v, const char* name) {
    if (!v) throw SchemaError(fmt::format("dataset has no '{}' column", name));
    return *v;
}

void check_len(Eigen::Index got, Eigen::Index n, const char* name) {
    if (got != n) throw SchemaError(fmt::format("column '{}' has {} rows, expected {}", name, got, n));
}

VectorXd take(const VectorXd& v, const std::vector<Eigen::Index>& idx) {
    VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
    return out;
}

MatrixXd take(const MatrixXd& m, const std::vector<Eigen::Index>& idx) {
    MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
    return out;
}

template <class T>
std::optional<T> take_opt(const std::optional<T>& v, const std::vector<Eigen::Index>& idx) {
    if (!v) return std::nullopt;
    return take(*v, idx);
}

}  // namespace

Dataset::Dataset(Columns cols) : cols_(std::move(cols)) {
    const auto n = cols_.y.size();
    check_len(cols_.x.rows(), n, "x");
    if (cols_.y2) check_len(cols_.y2->size(), n, "y2");
    if (cols_.z) check_len(cols_.z->rows(), n, "z");
    if (cols_.a) check_len(cols_.a->size(), n, "a");
    for (const auto* p : {&cols_.propensity, &cols_.propensity_x}) {
        if (!*p) continue;
        check_len((*p)->size(), n, "propensity");
        if (((*p)->array() <= 0.0).any() || ((*p)->array() >= 1.0).any())
            throw SchemaError("propensity values must lie strictly inside (0, 1)");
    }
    if (cols_.obs_weights) {
        check_len(cols_.obs_weights->size(), n, "obs_weights");
        if ((cols_.obs_weights->array() < 0.0).any() || !cols_.obs_weights->allFinite())
            throw SchemaError("obs_weights must be finite and nonnegative");
        if (!(cols_.obs_weights->array() > 0.0).any())
            throw SchemaError("obs_weights needs at least one strictly positive entry");
        weights_ = *cols_.obs_weights;
    } else {
        weights_ = VectorXd::Ones(n);
    }
    if (cols_.x_names.empty())
        for (Eigen::Index j = 0; j < cols_.x.cols(); ++j) cols_.x_names.push_back(fmt::format("x{}", j));
    if (cols_.z && cols_.z_names.empty())
        for (Eigen::Index j = 0; j < cols_.z->cols(); ++j) cols_.z_names.push_back(fmt::format("z{}", j));
}

const VectorXd& Dataset::y2() const { return require(cols_.y2, "y2"); }
const MatrixXd& Dataset::z() const { return require(cols_.z, "z"); }
const VectorXd& Dataset::a() const { return require(cols_.a, "a"); }
const VectorXd& Dataset::propensity() const { return require(cols_.propensity, "propensity"); }
const VectorXd& Dataset::propensity_x() const { return require(cols_.propensity_x, "propensity_x"); }

Dataset Dataset::with_weights(VectorXd w) const {
    Columns c = cols_;
    c.obs_weights = std::move(w);
    return Dataset(std::move(c));
}

Dataset Dataset::with_z(MatrixXd z) const {
    Columns c = cols_;
    c.z = std::move(z);
    if (c.z_names.size() != static_cast<std::size_t>(c.z->cols())) c.z_names.clear();
    return Dataset(std::move(c));
}

Dataset Dataset::select_rows(const std::vector<Eigen::Index>& idx) const {
    for (auto i : idx)
        if (i < 0 || i >= n()) throw SchemaError(fmt::format("row index {} out of range", i));
    Columns c;
    c.y = take(cols_.y, idx);
    c.y2 = take_opt(cols_.y2, idx);
    c.x = take(cols_.x, idx);
    c.z = take_opt(cols_.z, idx);
    c.a = take_opt(cols_.a, idx);
    c.propensity = take_opt(cols_.propensity, idx);
    c.propensity_x = take_opt(cols_.propensity_x, idx);
    c.obs_weights = take_opt(cols_.obs_weights, idx);
    c.x_names = cols_.x_names;
    c.z_names = cols_.z_names;
    return Dataset(std::move(c));
}

Term Term::operator*(const Term& other) const {
    Term t = *this;
    t.factors.insert(t.factors.end(), other.factors.begin(), other.factors.end());
    return t;
}

FeatureMap FeatureMap::columns(Eigen::Index x_cols, Eigen::Index z_cols, bool with_z) {
    std::vector<Term> t;
    for (Eigen::Index j = 0; j < x_cols; ++j) t.push_back(Term::x(j));
    if (with_z)
        for (Eigen::Index j = 0; j < z_cols; ++j) t.push_back(Term::z(j));
    return FeatureMap(std::move(t));
}

FeatureMap FeatureMap::parse(const std::string& spec, const std::vector<std::string>& x_names,
                             const std::vector<std::string>& z_names) {
    auto resolve = [&](std::string tok) -> Term::Ref {
        tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
        if (auto it = std::find(x_names.begin(), x_names.end(), tok); it != x_names.end())
            return {Term::Block::x, it - x_names.begin()};
        if (auto it = std::find(z_names.begin(), z_names.end(), tok); it != z_names.end())
            return {Term::Block::z, it - z_names.begin()};
        if (tok.size() > 1 && (tok[0] == 'x' || tok[0] == 'z') &&
            std::all_of(tok.begin() + 1, tok.end(), ::isdigit)) {
            const auto idx = static_cast<Eigen::Index>(std::stol(tok.substr(1)));
            const auto& names = tok[0] == 'x' ? x_names : z_names;
            if (idx < static_cast<Eigen::Index>(names.size()))
                return {tok[0] == 'x' ? Term::Block::x : Term::Block::z, idx};
        }
        throw SchemaError(fmt::format("unknown feature column '{}'", tok));
    };

    std::vector<Term> terms;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        Term t;
        std::stringstream fs(item);
        std::string factor;
        while (std::getline(fs, factor, '*')) t.factors.push_back(resolve(factor));
        terms.push_back(std::move(t));
    }
    if (terms.empty()) throw SchemaError(fmt::format("empty feature specification '{}'", spec));
    return FeatureMap(std::move(terms));
}

bool FeatureMap::uses_z() const noexcept {
    return std::any_of(terms_.begin(), terms_.end(), [](const Term& t) {
        return std::any_of(t.factors.begin(), t.factors.end(),
                           [](const Term::Ref& r) { return r.block == Term::Block::z; });
    });
}

MatrixXd FeatureMap::materialize(const Dataset& data) const {
    MatrixXd out = MatrixXd::Ones(data.n(), width());
    for (Eigen::Index k = 0; k < width(); ++k) {
        for (const auto& r : terms_[static_cast<std::size_t>(k)].factors) {
            const MatrixXd& src = r.block == Term::Block::x ? data.x() : data.z();
            if (r.index < 0 || r.index >= src.cols())
                throw SchemaError(fmt::format("feature references missing {} column {}",
                                              r.block == Term::Block::x ? "x" : "z", r.index));
            out.col(k).array() *= src.col(r.index).array();
        }
    }
    return out;
}

}  // namespace mfuse

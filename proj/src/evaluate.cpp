#include "mvcwm/evaluate.hpp"

#include "mvcwm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

namespace mvcwm {

int count_free_params(const ModelSpec& spec) {
    const int p = spec.p;
    const int q = spec.q;
    const int r = spec.r;
    const int col_scale = r * (r + 1) / 2;
    int response = p * (1 + q) + p * (p + 1) / 2 + col_scale - 1;
    if (is_skewed(spec.response_family)) {
        response += p * r + tail_count(spec.response_family);
    }
    int covariate = 0;
    if (spec.models_covariates()) {
        covariate = q * r + q * (q + 1) / 2 + col_scale - 1;
        if (is_skewed(spec.covariate_family)) {
            covariate += q * r + tail_count(spec.covariate_family);
        }
    }
    return (spec.G - 1) + spec.G * (covariate + response);
}

double bic(double loglik, int n_params, Eigen::Index n_obs) {
    return 2.0 * loglik - static_cast<double>(n_params) * std::log(static_cast<double>(n_obs));
}

double adjusted_rand_index(const std::vector<int>& labels_a, const std::vector<int>& labels_b) {
    if (labels_a.size() != labels_b.size()) {
        throw DimensionError("adjusted_rand_index: label vectors differ in length");
    }
    const double n = static_cast<double>(labels_a.size());
    if (labels_a.size() < 2) {
        return 1.0;
    }
    std::map<std::pair<int, int>, double> table;
    std::map<int, double> rows;
    std::map<int, double> cols;
    for (std::size_t i = 0; i < labels_a.size(); ++i) {
        table[{labels_a[i], labels_b[i]}] += 1.0;
        rows[labels_a[i]] += 1.0;
        cols[labels_b[i]] += 1.0;
    }
    auto pairs = [](double k) { return 0.5 * k * (k - 1.0); };
    double index = 0.0;
    for (const auto& [key, v] : table) {
        index += pairs(v);
    }
    double sum_a = 0.0;
    for (const auto& [key, v] : rows) {
        sum_a += pairs(v);
    }
    double sum_b = 0.0;
    for (const auto& [key, v] : cols) {
        sum_b += pairs(v);
    }
    const double expected = sum_a * sum_b / pairs(n);
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) {
        // Both partitions are one block, or both are all singletons.
        return 1.0;
    }
    return (index - expected) / (max_index - expected);
}

std::vector<std::size_t> labeling_order(const ModelParams& params) {
    const auto& comps = params.components;
    std::vector<std::size_t> order(comps.size());
    std::iota(order.begin(), order.end(), 0);
    const bool by_mx = params.spec.models_covariates();
    auto key = [&](std::size_t g, Eigen::Index col) {
        const Eigen::MatrixXd& m = by_mx ? comps[g].M_X : comps[g].B;
        return col < m.cols() ? m(0, col) : 0.0;
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (key(a, 0) != key(b, 0)) {
            return key(a, 0) < key(b, 0);
        }
        return key(a, 1) < key(b, 1);
    });
    return order;
}

CoefficientMse mse_coefficients(const std::vector<ModelParams>& estimates,
                                const ModelParams& truth) {
    const auto truth_order = labeling_order(truth);
    const std::size_t G = truth.components.size();
    CoefficientMse out;
    for (std::size_t g = 0; g < G; ++g) {
        const auto& b = truth.components[truth_order[g]].B;
        out.mse.push_back(Eigen::MatrixXd::Zero(b.rows(), b.cols()));
    }
    for (const auto& est : estimates) {
        if (est.components.size() != G) {
            ++out.excluded;
            continue;
        }
        const auto order = labeling_order(est);
        bool shape_ok = true;
        for (std::size_t g = 0; g < G; ++g) {
            const auto& b = est.components[order[g]].B;
            if (b.rows() != out.mse[g].rows() || b.cols() != out.mse[g].cols() ||
                !b.allFinite()) {
                shape_ok = false;
            }
        }
        if (!shape_ok) {
            ++out.excluded;
            continue;
        }
        for (std::size_t g = 0; g < G; ++g) {
            const Eigen::MatrixXd diff =
                est.components[order[g]].B - truth.components[truth_order[g]].B;
            out.mse[g] += diff.cwiseAbs2();
        }
        ++out.used;
    }
    if (out.used > 0) {
        for (auto& m : out.mse) {
            m /= static_cast<double>(out.used);
        }
    }
    return out;
}

void pick_best(SelectionReport& report) {
    report.best = -1;
    for (std::size_t k = 0; k < report.entries.size(); ++k) {
        const auto& e = report.entries[k];
        if (!e.ok || !e.converged) {
            continue;
        }
        if (report.best < 0 || e.bic > report.entries[static_cast<std::size_t>(report.best)].bic) {
            report.best = static_cast<int>(k);
        }
    }
}

}  // namespace mvcwm

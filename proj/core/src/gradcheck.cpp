#include "ain/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>

namespace ain {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

void GradCheckReport::write_csv(std::ostream& out, bool header) const {
    if (header) out << "parameter,analytic,numeric,rel_err,index,checked,refined\n";
    out << std::setprecision(10);
    for (const auto& r : rows)
        out << r.name << ',' << r.analytic << ',' << r.numeric << ',' << r.rel_err << ',' << r.index << ','
            << r.checked << ',' << r.refined << '\n';
}

template <typename T>
GradCheckReport finite_diff_check(const std::type_identity_t<std::function<Var<T>()>>& loss, std::vector<Parameter<T>> params,
                                  const GradCheckOptions& options) {
    GradCheckReport report;
    zero_grad(params);
    const Var<T> root = loss();
    if (!root.value().all_finite()) {
        report.pass = report.finite = false;
        report.failure = "loss is not finite at the base point";
        return report;
    }
    backward(root);

    std::mt19937_64 rng(options.seed);
    const T h = static_cast<T>(options.step);
    for (auto& p : params) {
        const Tensor<T> analytic = p.grad();
        std::vector<std::size_t> idx(p.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        if (options.max_elements_per_param && idx.size() > options.max_elements_per_param) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(options.max_elements_per_param);
            std::sort(idx.begin(), idx.end());
        }
        GradCheckRow row{p.name(), 0, 0.0, 0.0, -1.0, idx.size(), 0};
        std::size_t refined = 0;
        for (std::size_t i : idx) {
            T& slot = p.value()[i];
            const T saved = slot;
            auto probe = [&](T step, T& fp, T& fm) {
                slot = saved + step;
                fp = loss().value()[0];
                slot = saved - step;
                fm = loss().value()[0];
                slot = saved;
            };
            T fp, fm;
            probe(h, fp, fm);
            if (!std::isfinite(fp) || !std::isfinite(fm)) {
                report.pass = report.finite = false;
                report.failure = "non-finite loss while perturbing " + p.name() + "[" + std::to_string(i) + "]";
                row.index = i;
                break;
            }
            const double a = static_cast<double>(analytic[i]);
            double numeric = static_cast<double>((fp - fm) / (2 * h));
            double err = relative_error(a, numeric);
            if (err >= options.tolerance && options.refine_at_kinks) {
                ++refined;
                for (T step = h / 100; step >= h / 10000 && err >= options.tolerance; step /= 100) {
                    T rp, rm;
                    probe(step, rp, rm);
                    const double n2 = static_cast<double>((rp - rm) / (2 * step));
                    const double e2 = relative_error(a, n2);
                    if (e2 < err) {
                        numeric = n2;
                        err = e2;
                    }
                }
            }
            if (err > row.rel_err) row = {p.name(), i, a, numeric, err, idx.size(), 0};
        }
        row.refined = refined;
        row.rel_err = std::max(row.rel_err, 0.0);
        report.max_rel_err = std::max(report.max_rel_err, row.rel_err);
        report.rows.push_back(row);
        if (!report.finite) break;
    }
    if (report.max_rel_err >= options.tolerance) {
        report.pass = false;
        if (report.failure.empty()) report.failure = "max relative error exceeds tolerance";
    }
    // Leave parameter gradients as the analytic values from the base point.
    return report;
}

template GradCheckReport finite_diff_check<double>(const std::function<Var<double>()>&,
                                                   std::vector<Parameter<double>>, const GradCheckOptions&);
template GradCheckReport finite_diff_check<long double>(const std::function<Var<long double>()>&,
                                                        std::vector<Parameter<long double>>, const GradCheckOptions&);

}  // namespace ain

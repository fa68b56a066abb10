#include "pstein/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>

namespace pstein {

using nlohmann::json;

namespace {

template <class T>
T field(const json& j, const char* key, const char* where)
{
    if (!j.is_object() || !j.contains(key)) throw FormatError(std::string(where) + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(std::string(where) + ": bad field '" + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where)
{
    if (!j.is_object()) throw FormatError(std::string(where) + ": expected an object");
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for (const char* key : keys) known = known || k == key;
        if (!known) throw FormatError(std::string(where) + ": unknown field '" + k + "'");
    }
}

Eigen::MatrixXd values_from_json(const json& j, Index rows, Index cols, const char* where)
{
    const auto v = field<std::vector<double>>(j, "values", where);
    if (static_cast<Index>(v.size()) != rows * cols)
        throw FormatError(std::string(where) + ": expected " + std::to_string(rows * cols) + " values, got " + std::to_string(v.size()));
    Eigen::MatrixXd m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
    return m;
}

json values_to_json(const Eigen::MatrixXd& m)
{
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(m.size()));
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
    return v;
}

class Csv
{
public:
    Csv(std::ostream& os, std::uint64_t seed, const std::vector<std::string>& header) : os_(os)
    {
        os_ << "# seed: " << seed << '\n';
        for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
        os_ << '\n';
    }

    Csv& operator<<(const std::string& s)
    {
        sep();
        if (s.find_first_of(",\"\n") == std::string::npos) {
            os_ << s;
        } else {
            os_ << '"';
            for (char c : s) os_ << (c == '"' ? "\"\"" : std::string(1, c));
            os_ << '"';
        }
        return *this;
    }
    Csv& operator<<(double v) { return *this << format_double(v); }
    Csv& operator<<(int v) { return *this << std::to_string(v); }
    Csv& operator<<(Index v) { return *this << std::to_string(v); }
    Csv& operator<<(bool v) { return *this << std::string(v ? "true" : "false"); }
    void end()
    {
        os_ << '\n';
        first_ = true;
    }

private:
    void sep()
    {
        if (!first_) os_ << ',';
        first_ = false;
    }
    std::ostream& os_;
    bool first_ = true;
};

}  // namespace

json grid_to_json(const MeasureGrid& grid)
{
    json j;
    j["atoms"] = grid.labels();
    j["weights"] = std::vector<double>(grid.weights().data(), grid.weights().data() + grid.size());
    if (grid.coords().size() != 0) {
        json rows = json::array();
        for (Index i = 0; i < grid.coords().rows(); ++i) {
            std::vector<double> r(static_cast<std::size_t>(grid.coords().cols()));
            for (Index c = 0; c < grid.coords().cols(); ++c) r[static_cast<std::size_t>(c)] = grid.coords()(i, c);
            rows.push_back(r);
        }
        j["coords"] = rows;
    }
    return j;
}

GridPtr grid_from_json(const json& j)
{
    reject_unknown(j, {"atoms", "weights", "coords"}, "grid");
    auto labels = field<std::vector<std::string>>(j, "atoms", "grid");
    const auto w = field<std::vector<double>>(j, "weights", "grid");
    Eigen::MatrixXd coords;
    if (j.contains("coords")) {
        const auto rows = field<std::vector<std::vector<double>>>(j, "coords", "grid");
        if (!rows.empty()) {
            coords.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows[r].size() != rows[0].size()) throw FormatError("grid: coordinate rows differ in length");
                for (std::size_t c = 0; c < rows[r].size(); ++c) coords(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
            }
        }
    }
    try {
        return make_grid(MeasureGrid(std::move(labels), Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Index>(w.size())), coords));
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
}

json kernel_to_json(const Kernel& f)
{
    return {{"grid", grid_to_json(*f.grid())},
            {"order", f.order()},
            {"k_dim", f.k_dim()},
            {"symmetric", f.symmetric()},
            {"values", values_to_json(f.values())}};
}

Kernel kernel_from_json(const json& j)
{
    reject_unknown(j, {"grid", "order", "k_dim", "symmetric", "values"}, "kernel");
    const GridPtr g = grid_from_json(field<json>(j, "grid", "kernel"));
    const int q = field<int>(j, "order", "kernel");
    const int k = field<int>(j, "k_dim", "kernel");
    if (q < 0 || k < 0) throw FormatError("kernel: order and k_dim must be nonnegative");
    const bool sym = j.contains("symmetric") ? field<bool>(j, "symmetric", "kernel") : false;
    Eigen::MatrixXd v = values_from_json(j, int_pow(g->size(), q), std::max(k, 1), "kernel");
    try {
        Kernel f(g, q, k, std::move(v), false);
        if (sym) {
            if (symmetry_defect(f) > 1e-12) throw FormatError("kernel: flagged symmetric but is not");
            f = Kernel(g, q, k, f.values(), true);
        }
        return f;
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
}

json chaos_to_json(const ChaosVector& x)
{
    json ks = json::array();
    for (const auto& [q, f] : x.kernels()) ks.push_back({{"order", q}, {"symmetric", f.symmetric()}, {"values", values_to_json(f.values())}});
    return {{"grid", grid_to_json(*x.grid())}, {"k_dim", x.k_dim()}, {"kernels", ks}};
}

ChaosVector chaos_from_json(const json& j)
{
    reject_unknown(j, {"grid", "k_dim", "kernels"}, "chaos vector");
    const GridPtr g = grid_from_json(field<json>(j, "grid", "chaos vector"));
    const int k = field<int>(j, "k_dim", "chaos vector");
    if (k < 0) throw FormatError("chaos vector: k_dim must be nonnegative");
    const json ks = field<json>(j, "kernels", "chaos vector");
    if (!ks.is_array()) throw FormatError("chaos vector: 'kernels' must be an array");
    ChaosVector x(g, k);
    for (const auto& kj : ks) {
        reject_unknown(kj, {"order", "symmetric", "values"}, "chaos kernel");
        const int q = field<int>(kj, "order", "chaos kernel");
        if (q < 0) throw FormatError("chaos kernel: order must be nonnegative");
        Kernel f(g, q, k, values_from_json(kj, int_pow(g->size(), q), std::max(k, 1), "chaos kernel"), false);
        if (symmetry_defect(f) > 1e-12) throw FormatError("chaos kernel: order " + std::to_string(q) + " kernel is not symmetric");
        try {
            x.add(Kernel(g, q, k, f.values(), true));
        } catch (const std::invalid_argument& e) {
            throw FormatError(e.what());
        }
    }
    return x;
}

std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    for (int p = 15; p <= 17; ++p) {
        std::snprintf(buf, sizeof buf, "%.*g", p, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

void write_bound_csv(std::ostream& os, const BoundReport& rep, std::uint64_t seed)
{
    Csv csv(os, seed, {"term_kind", "q", "p", "r", "s", "l", "m", "value"});
    for (const auto& t : rep.per_pair_terms) {
        csv << t.kind << t.q << t.p << t.r << t.s << t.l << t.m << t.value;
        csv.end();
    }
    const bool contraction =
        std::any_of(rep.per_pair_terms.begin(), rep.per_pair_terms.end(), [](const BoundTerm& t) { return t.kind == "beta"; });
    std::vector<std::pair<const char*, double>> summary{{"m2", rep.m2}};
    if (contraction) {
        summary.insert(summary.end(), {{"contraction_term", rep.contraction_term}, {"total_contraction", rep.total_contraction()}});
    } else {
        summary.insert(summary.end(), {{"split_gap", rep.split_gap},
                                       {"exact_gap", rep.exact_gap},
                                       {"moment_detailed", rep.moment_term_detailed},
                                       {"moment_compact", rep.moment_term_compact}});
        if (rep.moment_term_compact_exact_gap >= 0) summary.emplace_back("moment_compact_exact_gap", rep.moment_term_compact_exact_gap);
        summary.insert(summary.end(), {{"total_detailed", rep.total_detailed()}, {"total_compact", rep.total_compact()}});
    }
    for (const auto& [k, v] : summary) {
        csv << std::string(k) << -1 << -1 << -1 << -1 << -1 << -1 << v;
        csv.end();
    }
}

void write_estimator_csv(std::ostream& os, const std::vector<EstimatorRow>& rows, std::uint64_t seed)
{
    Csv csv(os, seed, {"quantity", "estimate", "exact_value_if_any", "std_error", "reps", "seed"});
    for (const auto& r : rows) {
        csv << r.quantity << r.estimate << (r.exact ? format_double(*r.exact) : std::string()) << r.std_error << r.reps
            << std::to_string(r.seed);
        csv.end();
    }
}

void write_besov_csv(std::ostream& os, const BesovReport& rep, std::uint64_t seed)
{
    Csv csv(os, seed,
            {"lambda", "contraction_norm", "contraction_norm_sq", "closed_form_norm_sq", "hs_diff", "hs_diff_discrete", "m2",
             "total_bound", "slope_estimate", "slope_bound", "smooth_distance", "smooth_distance_se"});
    for (const auto& r : rep.rows) {
        csv << r.lambda << r.contraction_norm << r.contraction_norm_sq << r.closed_form << r.hs_diff << r.hs_diff_discrete << r.m2
            << r.total_bound << rep.slope_norm_sq << rep.slope_bound;
        if (r.smooth_distance >= 0)
            csv << r.smooth_distance << r.smooth_distance_se;
        else
            csv << std::string() << std::string();
        csv.end();
    }
}

void write_rgg_csv(std::ostream& os, const RggReport& rep, std::uint64_t seed)
{
    std::vector<std::string> header{"lambda", "regime", "radius", "psi1", "lambda_psi", "sigma_sq_printed", "sigma_sq_kernel", "m2"};
    for (const auto& [q, p, r, l] : seven_contractions())
        header.push_back("norm_sq_f" + std::to_string(q) + "_" + std::to_string(r) + "_" + std::to_string(l) + "_f" + std::to_string(p));
    for (const char* h : {"beta", "contraction_term", "cov_term_printed", "cov_term_corrected", "total_bound", "rate_theorem",
                          "rate_proof", "cov_max_dev", "cov_max_dev_se", "cov_max_dev_corrected_se", "mean_max_dev_se", "slope",
                          "slope_contraction", "slope_rate_theorem", "slope_rate_proof"})
        header.emplace_back(h);
    Csv csv(os, seed, header);
    auto opt = [](double v) { return v < 0 ? std::string() : format_double(v); };
    for (const auto& r : rep.rows) {
        csv << r.lambda << to_string(r.regime) << r.radius << r.psi1 << r.lambda_psi << r.sigma_sq_printed << r.sigma_sq_kernel << r.m2;
        for (double v : r.norms) csv << v;
        csv << r.beta << r.contraction_term << r.cov_term_printed << r.cov_term_corrected << r.total_bound << r.rate_theorem
            << r.rate_proof << opt(r.cov_max_dev) << opt(r.cov_max_dev_se) << opt(r.cov_max_dev_corrected_se) << opt(r.mean_max_dev_se)
            << rep.slope_bound << rep.slope_contraction << rep.slope_rate_theorem << rep.slope_rate_proof;
        csv.end();
    }
}

void write_checks_csv(std::ostream& os, const std::vector<CheckResult>& checks, std::uint64_t seed)
{
    Csv csv(os, seed, {"check", "description", "gating", "passed", "summary"});
    for (const auto& c : checks) {
        csv << c.id << c.name << c.gating << c.passed << c.summary;
        csv.end();
    }
}

}  // namespace pstein

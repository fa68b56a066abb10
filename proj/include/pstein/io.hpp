// JSON interchange for grids, kernels and chaos vectors; CSV tables.
//
// Kernel JSON:
//   {"grid": {"atoms": [labels], "weights": [...], "coords": [[...], ...]?},
//    "order": q, "k_dim": k, "symmetric": bool, "values": [row-major, n^q x max(k,1)]}
// Chaos vector JSON:
//   {"grid": {...}, "k_dim": k, "kernels": [{"order", "symmetric", "values"}, ...]}
//
// CSV files start with "# seed: <n>", then a header row; LF line endings.

#ifndef PSTEIN_IO_HPP
#define PSTEIN_IO_HPP

#include "pstein/besov.hpp"
#include "pstein/bounds.hpp"
#include "pstein/checks.hpp"
#include "pstein/poisson_mc.hpp"
#include "pstein/rgg.hpp"

#include <json.hpp>

#include <iosfwd>
#include <stdexcept>
#include <string>

namespace pstein {

class FormatError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

nlohmann::json grid_to_json(const MeasureGrid& grid);
GridPtr grid_from_json(const nlohmann::json& j);

nlohmann::json kernel_to_json(const Kernel& f);
Kernel kernel_from_json(const nlohmann::json& j);

nlohmann::json chaos_to_json(const ChaosVector& x);
ChaosVector chaos_from_json(const nlohmann::json& j);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

void write_bound_csv(std::ostream& os, const BoundReport& rep, std::uint64_t seed);
void write_estimator_csv(std::ostream& os, const std::vector<EstimatorRow>& rows, std::uint64_t seed);
void write_besov_csv(std::ostream& os, const BesovReport& rep, std::uint64_t seed);
void write_rgg_csv(std::ostream& os, const RggReport& rep, std::uint64_t seed);
/// Fields containing commas or quotes are quoted.
void write_checks_csv(std::ostream& os, const std::vector<CheckResult>& checks, std::uint64_t seed);

}  // namespace pstein

#endif  // PSTEIN_IO_HPP

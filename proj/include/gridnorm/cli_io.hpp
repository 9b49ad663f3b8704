#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gridnorm/mc_harness.hpp"
#include "gridnorm/random_fields.hpp"

namespace gridnorm {

inline constexpr const char* kToolName = "gridnorm";
inline constexpr const char* kToolVersion = "0.1.0";

/// Shortest round-trip decimal rendering, locale independent.
std::string format_double(double value);

/// Write-temp-then-rename so readers never observe a partial file.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

/// Field CSV: header ix,iy,var_1,...,var_p; one row per site, every site
/// exactly once; values round-trip at full precision. The loader infers the
/// grid shape and assigns the unit-square spacing 1/(max side - 1).
LatticeField load_field_csv(const std::filesystem::path& path);
void save_field_csv(const LatticeField& field, const std::filesystem::path& path);

/// Rejection-curve CSV with columns test,h_star,rate,stderr,n_sim.
std::string curves_csv(const std::vector<RejectionCurve>& curves);

/// Curve-bundle CSV with columns curve,x,value.
std::string bundle_csv(const CurveBundle& bundle);
CurveBundle load_bundle_csv(const std::filesystem::path& path);

/// Functional summary CSVs: per-point envelope table and per-curve
/// depth/outlier table.
std::string functional_summary_csv(const FunctionalSummary& summary,
                                   const CurveBundle& bundle);
std::string functional_depths_csv(const FunctionalSummary& summary);

/// Full command-line dispatch (subcommands simulate, test, size, power,
/// summarize). Returns the process exit status: 0 success, 3 input or
/// configuration error, 4 numerical failure.
int run_cli(int argc, const char* const* argv);

}  // namespace gridnorm

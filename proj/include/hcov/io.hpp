#pragma once
//
// Text formats: the observation file (count line, then coordinates and value
// per line), the optimizer iteration log and the result tables.
//

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hcov/estimate.hpp"
#include "hcov/likelihood.hpp"

namespace hcov {

//! shortest decimal string that reads back to the same double
std::string format_number(double v);

/// First line: record count N > 0. Then N records of dim coordinates and one
/// value, separated by any run of spaces or tabs. Blank lines are ignored.
Dataset parse_input(std::istream& in, std::size_t dim = 2);
Dataset parse_input_file(const std::filesystem::path& path, std::size_t dim = 2);

void write_dataset(std::ostream& out, const Dataset& ds);
void write_dataset_file(const std::filesystem::path& path, const Dataset& ds);

/// One row per iteration: "index nu ell sigma2 L = <value> TOL= <size>",
/// where value is the minimized negative log-likelihood.
void write_iteration_log(std::ostream& out, const std::vector<SimplexIteration>& trace);
//! the final line written after a converged fit
void write_solution_line(std::ostream& out, const FitResult& fit);
std::vector<SimplexIteration> parse_iteration_log(std::istream& in);

/// "n ell nu sigma2" per successful replicate; failures become comment lines
/// starting with '#'.
void write_replicate_csv(std::ostream& out, const std::vector<ReplicateRecord>& records);

void write_profile_csv(std::ostream& out, Parameter vary, const std::vector<ProfileRow>& rows);

} // namespace hcov

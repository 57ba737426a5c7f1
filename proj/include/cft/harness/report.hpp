#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include "cft/harness/runner.hpp"

namespace cft::harness {

/// One JSON object on a single line: id, category, target, targets_flaw, expected,
/// verdict, reason, crash_delta, err_replies, elapsed_ms and evidence.
std::string report_line(const CaseOutcome& outcome);

/// Writes one report line per outcome. Throws std::runtime_error when the file cannot be written.
void write_report(const std::filesystem::path& path, const SuiteReport& report);

/// Human-readable result table with totals.
void print_summary(std::ostream& out, const SuiteReport& report);

/// Case verdict and evidence, as printed by a one-shot attack.
void print_case_result(std::ostream& out, const AttackCase& attack, const CaseResult& result);

}  // namespace cft::harness

#include "cft/harness/report.hpp"

#include <fstream>
#include <iomanip>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cft::harness {

namespace {

nlohmann::json evidence_json(const CaseResult& result) {
  auto list = nlohmann::json::array();
  for (const auto& e : result.evidence) {
    nlohmann::json item{{"kind", evidence_kind_name(e.kind)}, {"step", e.step}, {"detail", e.detail}};
    if (!e.bytes.empty()) item["hex"] = to_hex(e.bytes);
    list.push_back(std::move(item));
  }
  if (result.evidence_dropped > 0) {
    list.push_back({{"kind", "note"}, {"detail", std::to_string(result.evidence_dropped) + " further entries omitted"}});
  }
  return list;
}

}  // namespace

std::string report_line(const CaseOutcome& outcome) {
  nlohmann::json line{
      {"id", outcome.case_id},
      {"category", category_name(outcome.category)},
      {"target", outcome.target},
      {"targets_flaw", outcome.targets_flaw ? nlohmann::json(server::flaw_id(*outcome.targets_flaw)) : nlohmann::json()},
      {"expected", verdict_name(outcome.expected)},
      {"verdict", verdict_name(outcome.result.verdict.kind)},
      {"reason", outcome.result.verdict.reason},
      {"passed", outcome.passed()},
      {"crash_delta",
       outcome.result.crash_delta ? nlohmann::json(*outcome.result.crash_delta) : nlohmann::json()},
      {"err_replies", outcome.result.err_replies},
      {"elapsed_ms", outcome.result.elapsed.count()},
      {"evidence", evidence_json(outcome.result)},
  };
  // Replies may carry arbitrary bytes; replace invalid UTF-8 rather than throw.
  return line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

void write_report(const std::filesystem::path& path, const SuiteReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  for (const auto& outcome : report.outcomes) out << report_line(outcome) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("failed writing report " + path.string());
}

void print_summary(std::ostream& out, const SuiteReport& report) {
  for (const auto& o : report.outcomes) {
    out << std::left << std::setw(28) << o.case_id << std::setw(12) << o.target << std::setw(22)
        << verdict_name(o.result.verdict.kind) << (o.passed() ? "ok  " : "FAIL") << "  " << o.result.verdict.reason
        << '\n';
  }
  out << "cases run: " << report.outcomes.size() << ", confirmations: " << report.confirmations()
      << ", failures: " << report.failures() << ", wall time: " << report.elapsed.count() << " ms\n";
  out << "suite " << (report.passed() ? "PASS" : "FAIL") << '\n';
}

void print_case_result(std::ostream& out, const AttackCase& attack, const CaseResult& result) {
  out << attack.id << " (" << category_name(attack.category) << ", "
      << (attack.targets_flaw ? server::flaw_id(*attack.targets_flaw) : std::string("no flaw")) << ", "
      << signature_name(attack.signature) << ")\n";
  for (const auto& e : result.evidence) {
    out << "  [" << e.step << "] " << std::setw(5) << std::left << evidence_kind_name(e.kind) << ' ' << e.detail;
    if (!e.bytes.empty()) out << "\n        " << to_hex(e.bytes);
    out << '\n';
  }
  if (result.evidence_dropped > 0) out << "  ... " << result.evidence_dropped << " further entries omitted\n";
  out << verdict_name(result.verdict.kind) << ": " << result.verdict.reason << '\n';
}

}  // namespace cft::harness

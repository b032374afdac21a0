#include "histofilter/report_io.hpp"

#include <charconv>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "histofilter/error.hpp"
#include "io_util.hpp"

namespace histofilter {

namespace {

constexpr std::string_view kPerFoldHeader =
    "magnification,seed,fold,patches,images_sum,images_vote,patients_sum,patients_vote,train_patches,test_patches,"
    "best_C,best_gamma,excluded_images";

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out.push_back(sep);
    out += items[i];
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw Error(ErrorCode::MalformedRow, fmt::format("line {}: bad number '{}'", line, s));
  return v;
}

std::string pct(const MetricSummary& m) { return fmt::format("{:.2f} ± {:.2f}", 100.0 * m.mean, 100.0 * m.std); }

nlohmann::json metric(const MetricSummary& m) { return {{"mean", m.mean}, {"std", m.std}}; }

}  // namespace

std::string per_fold_csv(const ExperimentReport& report) {
  std::string out(kPerFoldHeader);
  out.push_back('\n');
  for (const auto& f : report.per_fold) {
    csv::append_row(out, {std::string(to_string(f.magnification)), fmt::format("{}", f.seed),
                          fmt::format("{}", f.fold_index), fmt::format("{}", f.patch_acc),
                          fmt::format("{}", f.image_sum), fmt::format("{}", f.image_vote),
                          fmt::format("{}", f.patient_sum), fmt::format("{}", f.patient_vote),
                          fmt::format("{}", f.train_patches), fmt::format("{}", f.test_patches),
                          fmt::format("{}", f.best_C), fmt::format("{}", f.best_gamma), join(f.excluded_images, ';')});
  }
  return out;
}

ExperimentReport parse_per_fold_csv(std::string_view text) {
  std::vector<csv::Row> rows;
  std::string err;
  if (!csv::parse(text, rows, err)) throw Error(ErrorCode::MalformedRow, err);
  if (rows.empty() || join(rows.front().fields, ',') != kPerFoldHeader)
    throw Error(ErrorCode::MissingColumn, "per-fold header");
  ExperimentReport report;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& r = rows[k];
    if (r.fields.size() != 13) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected 13 fields", r.line));
    FoldResult f;
    const auto mag = parse_magnification(r.fields[0]);
    if (!mag) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: magnification", r.line));
    f.magnification = *mag;
    f.seed = parse_number<std::uint64_t>(r.fields[1], r.line);
    f.fold_index = parse_number<int>(r.fields[2], r.line);
    f.patch_acc = parse_number<double>(r.fields[3], r.line);
    f.image_sum = parse_number<double>(r.fields[4], r.line);
    f.image_vote = parse_number<double>(r.fields[5], r.line);
    f.patient_sum = parse_number<double>(r.fields[6], r.line);
    f.patient_vote = parse_number<double>(r.fields[7], r.line);
    f.train_patches = parse_number<std::size_t>(r.fields[8], r.line);
    f.test_patches = parse_number<std::size_t>(r.fields[9], r.line);
    f.best_C = parse_number<double>(r.fields[10], r.line);
    f.best_gamma = parse_number<double>(r.fields[11], r.line);
    const auto& ex = r.fields[12];
    for (std::size_t pos = 0; pos < ex.size();) {
      const auto next = std::min(ex.find(';', pos), ex.size());
      f.excluded_images.push_back(ex.substr(pos, next - pos));
      pos = next + 1;
    }
    report.per_fold.push_back(std::move(f));
  }
  report.summary = summarize(report.per_fold);
  return report;
}

ExperimentReport read_per_fold_csv(const std::filesystem::path& path) { return parse_per_fold_csv(io::read_file(path)); }

std::string summary_csv(const ExperimentReport& report) {
  std::string out = "magnification,runs,Patches,Images-Sum,Images-Vote,Patients-Sum,Patients-Vote\n";
  for (const auto& s : report.summary)
    csv::append_row(out, {std::string(to_string(s.magnification)), fmt::format("{}", s.runs), pct(s.patch_acc),
                          pct(s.image_sum), pct(s.image_vote), pct(s.patient_sum), pct(s.patient_vote)});
  return out;
}

std::string summary_json(const ExperimentReport& report) {
  using nlohmann::json;
  json j;
  j["filter"] = report.filter_name ? json(*report.filter_name) : json(nullptr);
  j["summary"] = json::array();
  for (const auto& s : report.summary)
    j["summary"].push_back({{"magnification", to_string(s.magnification)},
                            {"runs", s.runs},
                            {"patches", metric(s.patch_acc)},
                            {"images_sum", metric(s.image_sum)},
                            {"images_vote", metric(s.image_vote)},
                            {"patients_sum", metric(s.patient_sum)},
                            {"patients_vote", metric(s.patient_vote)}});
  j["per_fold"] = json::array();
  for (const auto& f : report.per_fold)
    j["per_fold"].push_back({{"magnification", to_string(f.magnification)},
                             {"seed", f.seed},
                             {"fold", f.fold_index},
                             {"patches", f.patch_acc},
                             {"images_sum", f.image_sum},
                             {"images_vote", f.image_vote},
                             {"patients_sum", f.patient_sum},
                             {"patients_vote", f.patient_vote},
                             {"excluded_images", f.excluded_images}});
  j["retention"] = json::array();
  for (const auto& r : report.retention)
    j["retention"].push_back({{"magnification", to_string(r.magnification)},
                              {"pct_patches", r.pct_patches_relevant},
                              {"pct_images", r.pct_images_with_all_patches_relevant},
                              {"pct_patients", r.pct_patients_with_all_images_relevant}});
  return j.dump(1) + "\n";
}

std::string win_loss_csv(std::span<const WinLoss> rows) {
  std::string out = "fold,wins,losses,ties\n";
  for (const auto& r : rows) out += fmt::format("{},{},{},{}\n", r.fold_index, r.wins, r.losses, r.ties);
  return out;
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  io::write_file_atomic(dir / "per_fold.csv", per_fold_csv(report));
  io::write_file_atomic(dir / "summary.csv", summary_csv(report));
  io::write_file_atomic(dir / "summary.json", summary_json(report));
  if (report.filter_name) write_retention_csv(report.retention, *report.filter_name, dir / "retention.csv");
}

}  // namespace histofilter

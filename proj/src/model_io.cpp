#include "histofilter/model_io.hpp"

#include <bit>
#include <cstring>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <sodium.h>

#include "histofilter/error.hpp"
#include "io_util.hpp"

namespace histofilter {

namespace {

using json = nlohmann::json;

constexpr std::string_view kFormat = "histofilter-model";
constexpr int kVersion = 1;
constexpr auto kVariant = sodium_base64_VARIANT_ORIGINAL;

static_assert(std::endian::native == std::endian::little, "model blocks assume a little-endian host");

std::string to_base64(const double* data, std::size_t count) {
  const std::size_t bytes = count * sizeof(double);
  std::string out(sodium_base64_ENCODED_LEN(bytes, kVariant), '\0');
  sodium_bin2base64(out.data(), out.size(), reinterpret_cast<const unsigned char*>(data), bytes, kVariant);
  out.resize(std::strlen(out.c_str()));
  return out;
}

std::vector<double> from_base64(const std::string& text, std::size_t count) {
  std::vector<double> out(count);
  std::size_t written = 0;
  if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), count * sizeof(double), text.data(), text.size(),
                        nullptr, &written, nullptr, kVariant) != 0 ||
      written != count * sizeof(double))
    throw Error(ErrorCode::BadModel, "corrupt numeric block");
  return out;
}

json block(const double* data, Eigen::Index rows, Eigen::Index cols) {
  return json{{"rows", rows}, {"cols", cols}, {"f64le", to_base64(data, static_cast<std::size_t>(rows * cols))}};
}

json block(const RowMatrix& m) { return block(m.data(), m.rows(), m.cols()); }
json block(const Eigen::VectorXd& v) { return block(v.data(), v.size(), 1); }

std::vector<double> unblock(const json& j, Eigen::Index& rows, Eigen::Index& cols) {
  rows = j.at("rows").get<Eigen::Index>();
  cols = j.at("cols").get<Eigen::Index>();
  if (rows < 0 || cols < 0) throw Error(ErrorCode::BadModel, "negative block shape");
  return from_base64(j.at("f64le").get<std::string>(), static_cast<std::size_t>(rows * cols));
}

RowMatrix unblock_matrix(const json& j) {
  Eigen::Index r = 0, c = 0;
  auto v = unblock(j, r, c);
  return Eigen::Map<RowMatrix>(v.data(), r, c);
}

Eigen::VectorXd unblock_vector(const json& j) {
  Eigen::Index r = 0, c = 0;
  auto v = unblock(j, r, c);
  if (c != 1) throw Error(ErrorCode::BadModel, "expected a column block");
  return Eigen::Map<Eigen::VectorXd>(v.data(), r);
}

json envelope(std::string_view kind) { return json{{"format", kFormat}, {"version", kVersion}, {"kind", kind}}; }

json svm_json(const SvmModel& m) {
  json j{{"support_vectors", block(m.support_vectors)},
         {"dual_coeffs", block(m.dual_coeffs)},
         {"bias", m.bias},
         {"gamma", m.gamma},
         {"C", m.C},
         {"c_positive", m.c_positive},
         {"c_negative", m.c_negative},
         {"positive_label", m.positive_label},
         {"negative_label", m.negative_label}};
  if (m.platt) j["platt"] = json{{"A", m.platt->A}, {"B", m.platt->B}};
  return j;
}

SvmModel svm_from(const json& j) {
  SvmModel m;
  m.support_vectors = unblock_matrix(j.at("support_vectors"));
  m.dual_coeffs = unblock_vector(j.at("dual_coeffs"));
  if (m.dual_coeffs.size() != m.support_vectors.rows()) throw Error(ErrorCode::BadModel, "coefficient count");
  m.bias = j.at("bias").get<double>();
  m.gamma = j.at("gamma").get<double>();
  m.C = j.at("C").get<double>();
  m.c_positive = j.at("c_positive").get<double>();
  m.c_negative = j.at("c_negative").get<double>();
  m.positive_label = j.at("positive_label").get<std::string>();
  m.negative_label = j.at("negative_label").get<std::string>();
  if (j.contains("platt")) m.platt = PlattParams{j["platt"].at("A").get<double>(), j["platt"].at("B").get<double>()};
  return m;
}

json pca_json(const PcaModel& m) {
  return json{{"mean", block(m.mean)},
              {"components", block(m.components)},
              {"eigenvalues", block(m.eigenvalues)},
              {"total_variance", m.total_variance}};
}

PcaModel pca_from(const json& j) {
  PcaModel m;
  m.mean = unblock_vector(j.at("mean"));
  m.components = unblock_matrix(j.at("components"));
  m.eigenvalues = unblock_vector(j.at("eigenvalues"));
  m.total_variance = j.at("total_variance").get<double>();
  if (m.components.cols() != m.mean.size() || m.eigenvalues.size() != m.components.rows())
    throw Error(ErrorCode::BadModel, "inconsistent PCA shapes");
  return m;
}

std::string dump(const json& j) { return j.dump(1) + "\n"; }

json parse(std::string_view text, std::string_view kind) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadModel, e.what());
  }
  if (!j.is_object() || j.value("format", "") != kFormat) throw Error(ErrorCode::BadModel, "not a histofilter model");
  if (j.value("version", 0) != kVersion)
    throw Error(ErrorCode::BadModel, fmt::format("unsupported version {}", j.value("version", 0)));
  if (j.value("kind", "") != kind)
    throw Error(ErrorCode::BadModel, fmt::format("expected a {} model, found '{}'", kind, j.value("kind", "")));
  return j;
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadModel, e.what());
  }
}

std::string read_model_text(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingModel, path.string());
  return io::read_file(path);
}

}  // namespace

std::string encode_model(const SvmModel& model) {
  auto j = envelope("svm");
  j["svm"] = svm_json(model);
  return dump(j);
}

std::string encode_model(const PcaModel& model) {
  auto j = envelope("pca");
  j["pca"] = pca_json(model);
  return dump(j);
}

std::string encode_model(const FilterModel& model) {
  auto j = envelope("filter");
  j["scenario"] = to_string(model.scenario);
  j["feature_kind"] = to_string(model.feature_kind);
  j["svm"] = svm_json(model.svm);
  if (model.pca) j["pca"] = pca_json(*model.pca);
  j["validation_accuracy"] = model.validation_accuracy;
  j["cv_accuracy"] = model.cv_accuracy;
  return dump(j);
}

std::string encode_model(const TumorModel& model) {
  auto j = envelope("tumor");
  j["svm"] = svm_json(model.svm);
  if (model.pca) j["pca"] = pca_json(*model.pca);
  j["cv_accuracy"] = model.cv_accuracy;
  return dump(j);
}

SvmModel decode_svm_model(std::string_view text) {
  return guarded([&] { return svm_from(parse(text, "svm").at("svm")); });
}

PcaModel decode_pca_model(std::string_view text) {
  return guarded([&] { return pca_from(parse(text, "pca").at("pca")); });
}

FilterModel decode_filter_model(std::string_view text) {
  return guarded([&] {
    const auto j = parse(text, "filter");
    FilterModel m;
    const auto scenario = parse_scenario_id(j.at("scenario").get<std::string>());
    const auto kind = parse_feature_kind(j.at("feature_kind").get<std::string>());
    if (!scenario || !kind) throw Error(ErrorCode::BadModel, "unknown scenario or feature kind");
    m.scenario = *scenario;
    m.feature_kind = *kind;
    m.svm = svm_from(j.at("svm"));
    if (j.contains("pca")) m.pca = pca_from(j["pca"]);
    if (m.pca.has_value() != pca_dim(m.feature_kind).has_value())
      throw Error(ErrorCode::BadModel, "PCA presence does not match the feature kind");
    m.validation_accuracy = j.at("validation_accuracy").get<double>();
    m.cv_accuracy = j.at("cv_accuracy").get<double>();
    return m;
  });
}

TumorModel decode_tumor_model(std::string_view text) {
  return guarded([&] {
    const auto j = parse(text, "tumor");
    TumorModel m;
    m.svm = svm_from(j.at("svm"));
    if (j.contains("pca")) m.pca = pca_from(j["pca"]);
    m.cv_accuracy = j.at("cv_accuracy").get<double>();
    return m;
  });
}

template <typename Model>
void write_model(const Model& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_model(model));
}

template void write_model(const SvmModel&, const std::filesystem::path&);
template void write_model(const PcaModel&, const std::filesystem::path&);
template void write_model(const FilterModel&, const std::filesystem::path&);
template void write_model(const TumorModel&, const std::filesystem::path&);

SvmModel read_svm_model(const std::filesystem::path& path) { return decode_svm_model(read_model_text(path)); }
PcaModel read_pca_model(const std::filesystem::path& path) { return decode_pca_model(read_model_text(path)); }
FilterModel read_filter_model(const std::filesystem::path& path) { return decode_filter_model(read_model_text(path)); }
TumorModel read_tumor_model(const std::filesystem::path& path) { return decode_tumor_model(read_model_text(path)); }

}  // namespace histofilter

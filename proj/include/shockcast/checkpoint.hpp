#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "shockcast/error.hpp"
#include "shockcast/model.hpp"
#include "shockcast/text_io.hpp"

namespace shockcast {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "shockcast-checkpoint";

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson matrix_json(const Matrix& m) {
  ojson j;
  j["shape"] = {m.rows(), m.cols()};
  j["data"] = m.data();
  return j;
}

inline ojson vector_json(const Vector& v) { return matrix_json(Matrix(1, v.size(), v)); }

inline Matrix matrix_from_json(const ojson& j, const std::string& name, std::size_t rows, std::size_t cols) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data")) {
    throw IntegrityError("checkpoint tensor '" + name + "' is malformed");
  }
  const auto& shape = j.at("shape");
  if (!shape.is_array() || shape.size() != 2 || !shape[0].is_number_unsigned() || !shape[1].is_number_unsigned()) {
    throw IntegrityError("checkpoint tensor '" + name + "' has a malformed shape");
  }
  const auto r = shape[0].get<std::size_t>();
  const auto c = shape[1].get<std::size_t>();
  if (r != rows || c != cols) {
    throw IntegrityError("checkpoint tensor '" + name + "' has shape " + std::to_string(r) + "x" + std::to_string(c) +
                         ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  const auto& data = j.at("data");
  if (!data.is_array() || data.size() != r * c) {
    throw IntegrityError("checkpoint tensor '" + name + "' data length does not match its shape");
  }
  std::vector<double> values;
  values.reserve(data.size());
  for (const auto& x : data) {
    if (!x.is_number()) throw IntegrityError("checkpoint tensor '" + name + "' has a non-numeric entry");
    values.push_back(x.get<double>());
  }
  return Matrix(r, c, std::move(values));
}

template <typename T>
T required(const ojson& j, const char* key) {
  if (!j.contains(key)) throw IntegrityError(std::string("checkpoint is missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw IntegrityError(std::string("checkpoint field '") + key + "' has the wrong type");
  }
}

}  // namespace detail

inline std::string checkpoint_to_string(const ModelParams& p) {
  using detail::ojson;
  ojson j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  const auto& h = p.hyper;
  j["hyper"] = {{"window", h.window},   {"d_prime", h.d_prime},         {"hidden", h.hidden},
                {"attn", h.attn},       {"head_hidden", h.head_hidden}, {"dropout", h.dropout},
                {"seed", h.seed},       {"variant", to_string(h.variant)}};
  j["embedding_dim"] = p.embedding_dim;
  j["price_norm"] = {{"mean", p.price_norm.mean}, {"stddev", p.price_norm.stddev}};
  if (uses_pca(h.variant)) {
    j["pca"] = {{"mean", detail::vector_json(p.pca.mean)},
                {"components", detail::matrix_json(p.pca.components)},
                {"explained_variance", detail::vector_json(p.pca.explained_variance)},
                {"fitted_on", p.pca.fitted_on}};
  } else {
    j["pca"] = nullptr;
  }
  ojson params = ojson::object();
  for_each_tensor(p.net, [&](const char* name, const Matrix& m, bool) { params[name] = detail::matrix_json(m); });
  j["parameters"] = std::move(params);
  ojson meta = ojson::object();
  for (const auto& [k, v] : p.metadata) meta[k] = v;
  j["metadata"] = std::move(meta);
  return j.dump(1) + "\n";
}

inline ModelParams checkpoint_from_string(const std::string& text) {
  using detail::ojson;
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IntegrityError(std::string("checkpoint is not valid JSON (truncated?): ") + e.what());
  }
  if (!j.is_object() || detail::required<std::string>(j, "format") != kCheckpointFormat) {
    throw IntegrityError("not a shockcast checkpoint");
  }
  const int version = detail::required<int>(j, "version");
  if (version != kCheckpointVersion) {
    throw MigrationError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(kCheckpointVersion) + ")");
  }

  ModelParams p;
  if (!j.contains("hyper") || !j["hyper"].is_object()) throw IntegrityError("checkpoint is missing 'hyper'");
  const auto& h = j["hyper"];
  p.hyper.window = detail::required<std::size_t>(h, "window");
  p.hyper.d_prime = detail::required<std::size_t>(h, "d_prime");
  p.hyper.hidden = detail::required<std::size_t>(h, "hidden");
  p.hyper.attn = detail::required<std::size_t>(h, "attn");
  p.hyper.head_hidden = detail::required<std::size_t>(h, "head_hidden");
  p.hyper.dropout = detail::required<double>(h, "dropout");
  p.hyper.seed = detail::required<std::uint64_t>(h, "seed");
  try {
    p.hyper.variant = parse_variant(detail::required<std::string>(h, "variant"));
  } catch (const ConfigError& e) {
    throw IntegrityError(e.what());
  }
  p.embedding_dim = detail::required<std::size_t>(j, "embedding_dim");
  if (!j.contains("price_norm")) throw IntegrityError("checkpoint is missing 'price_norm'");
  p.price_norm.mean = detail::required<double>(j["price_norm"], "mean");
  p.price_norm.stddev = detail::required<double>(j["price_norm"], "stddev");
  if (!(p.price_norm.stddev > 0.0)) throw IntegrityError("checkpoint price_norm.stddev must be positive");

  if (uses_pca(p.hyper.variant)) {
    if (!j.contains("pca") || !j["pca"].is_object()) throw IntegrityError("checkpoint is missing 'pca'");
    const auto& pj = j["pca"];
    if (!pj.contains("components") || !pj["components"].contains("shape")) {
      throw IntegrityError("checkpoint pca is malformed");
    }
    const auto& shape = pj["components"]["shape"];
    if (!shape.is_array() || shape.size() != 2 || !shape[1].is_number_unsigned()) {
      throw IntegrityError("checkpoint pca.components has a malformed shape");
    }
    const auto dp = shape[1].get<std::size_t>();
    if (dp == 0 || dp > p.embedding_dim) throw IntegrityError("checkpoint pca.components has an invalid width");
    p.pca.mean = detail::matrix_from_json(pj["mean"], "pca.mean", 1, p.embedding_dim).data();
    p.pca.components = detail::matrix_from_json(pj["components"], "pca.components", p.embedding_dim, dp);
    p.pca.explained_variance = detail::matrix_from_json(pj["explained_variance"], "pca.explained_variance", 1, dp).data();
    p.pca.fitted_on = detail::required<std::size_t>(pj, "fitted_on");
  }

  Network expected = zero_network(p);
  if (!j.contains("parameters") || !j["parameters"].is_object()) throw IntegrityError("checkpoint is missing 'parameters'");
  const auto& params = j["parameters"];
  for_each_tensor(expected, [&](const char* name, Matrix& m, bool) {
    if (!params.contains(name)) throw IntegrityError(std::string("checkpoint is missing tensor '") + name + "'");
    m = detail::matrix_from_json(params[name], name, m.rows(), m.cols());
  });
  expected.head.dropout = p.hyper.dropout;
  p.net = std::move(expected);
  if (j.contains("metadata") && j["metadata"].is_object()) {
    for (const auto& [k, v] : j["metadata"].items()) {
      if (!v.is_string()) throw IntegrityError("checkpoint metadata values must be strings");
      p.metadata.emplace_back(k, v.get<std::string>());
    }
  }
  return p;
}

inline void save_checkpoint(const ModelParams& p, const std::filesystem::path& path) {
  text::write_file(path, checkpoint_to_string(p));
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::string content;
  try {
    content = text::read_file(path);
  } catch (const ValidationError& e) {
    throw IntegrityError(e.what());
  }
  return checkpoint_from_string(content);
}

}  // namespace shockcast

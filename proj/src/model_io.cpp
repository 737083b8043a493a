#include "spikeforge/model_io.hpp"

#include "spikeforge/error.hpp"
#include "spikeforge/text_io.hpp"

namespace spikeforge {

using nlohmann::json;

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

// An empty matrix has no rows to carry its width; `cols` supplies it.
Eigen::MatrixXd matrix_from(const json& doc, Eigen::Index cols_if_empty = 0) {
  const auto rows = static_cast<Eigen::Index>(doc.size());
  if (rows == 0) return Eigen::MatrixXd(0, cols_if_empty);
  const auto cols = static_cast<Eigen::Index>(doc.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(doc.at(r).size()) != cols) throw DataError("ragged matrix in model file");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = doc.at(r).at(c).get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from(const json& doc) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(doc.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = doc.at(i).get<double>();
  return v;
}

}  // namespace

json to_json(const ModelParams& params) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, StmParams>) {
          return {{"w", matrix_json(p.w)},
                  {"u", matrix_json(p.u)},
                  {"beta", matrix_json(p.beta)},
                  {"b", vector_json(p.b)}};
        } else if constexpr (std::is_same_v<T, LnpParams>) {
          return {{"w", vector_json(p.w)}, {"b", p.b}};
        } else {
          return {{"W1", matrix_json(p.w1)}, {"b1", vector_json(p.b1)},
                  {"W2", matrix_json(p.w2)}, {"b2", vector_json(p.b2)},
                  {"w3", vector_json(p.w3)}, {"b3", p.b3}};
        }
      },
      params);
}

ModelParams params_from_json(ModelKind kind, const json& doc) {
  ModelParams out;
  switch (kind) {
    case ModelKind::Stm: {
      StmParams p;
      p.w = matrix_from(doc.at("w"));
      p.u = matrix_from(doc.at("u"), p.w.cols());
      p.beta = matrix_from(doc.at("beta"), p.u.rows());
      p.b = vector_from(doc.at("b"));
      out = std::move(p);
      break;
    }
    case ModelKind::Lnp: {
      LnpParams p;
      p.w = vector_from(doc.at("w"));
      p.b = doc.at("b").get<double>();
      out = std::move(p);
      break;
    }
    case ModelKind::Mlnn: {
      MlnnParams p;
      p.w1 = matrix_from(doc.at("W1"));
      p.b1 = vector_from(doc.at("b1"));
      p.w2 = matrix_from(doc.at("W2"));
      p.b2 = vector_from(doc.at("b2"));
      p.w3 = vector_from(doc.at("w3"));
      p.b3 = doc.at("b3").get<double>();
      out = std::move(p);
      break;
    }
  }
  validate(out);
  return out;
}

json to_json(const PcaBasis& basis) {
  return {{"mean", vector_json(basis.mean)},
          {"components", matrix_json(basis.components)},
          {"explained_variance", vector_json(basis.explained_variance)},
          {"variance_fraction_kept", basis.variance_fraction_kept}};
}

PcaBasis basis_from_json(const json& doc) {
  PcaBasis basis;
  basis.mean = vector_from(doc.at("mean"));
  basis.components = matrix_from(doc.at("components"), basis.mean.size());
  basis.explained_variance = vector_from(doc.at("explained_variance"));
  basis.variance_fraction_kept = doc.value("variance_fraction_kept", 0.0);
  if (basis.components.cols() != basis.mean.size()) throw DataError("pca_basis: width mismatch");
  return basis;
}

json to_json(const ModelEnsemble& ensemble) {
  json members = json::array();
  for (const auto& m : ensemble.members) members.push_back(to_json(m));
  return {{"format_version", kModelFormatVersion},
          {"kind", std::string(to_string(ensemble.kind))},
          {"bin_rate_hz", ensemble.bin_rate_hz},
          {"window_ms", ensemble.window_ms},
          {"preprocessing", ensemble.preprocessing},
          {"pca_basis", to_json(ensemble.pca_basis)},
          {"members", std::move(members)},
          {"train_config", ensemble.train_config},
          {"provenance", ensemble.provenance}};
}

ModelEnsemble ensemble_from_json(const json& doc) {
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw DataError("model file format_version " + std::to_string(version) +
                      " is not supported (expected " + std::to_string(kModelFormatVersion) + ")");
    }
    ModelEnsemble e;
    e.kind = parse_model_kind(doc.at("kind").get<std::string>());
    e.bin_rate_hz = doc.at("bin_rate_hz").get<double>();
    e.window_ms = doc.at("window_ms").get<double>();
    e.preprocessing = doc.value("preprocessing", e.preprocessing);
    e.pca_basis = basis_from_json(doc.at("pca_basis"));
    for (const auto& m : doc.at("members")) e.members.push_back(params_from_json(e.kind, m));
    e.train_config = doc.value("train_config", json::object());
    e.provenance = doc.value("provenance", json::object());
    if (e.members.empty()) throw DataError("model file has no members");
    for (const auto& m : e.members) {
      if (input_dim(m) != e.pca_basis.n_kept()) {
        throw DataError("model member input size differs from pca_basis components");
      }
    }
    return e;
  } catch (const json::exception& ex) {
    throw DataError(std::string("model file: ") + ex.what());
  }
}

void save_model(const ModelEnsemble& ensemble, const std::filesystem::path& path) {
  text::write_file(path, to_json(ensemble).dump(1) + "\n");
}

ModelEnsemble load_model(const std::filesystem::path& path) {
  const std::string text = text::read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
  return ensemble_from_json(doc);
}

}  // namespace spikeforge

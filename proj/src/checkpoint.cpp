#include "planlab/checkpoint.hpp"

#include <fstream>

namespace planlab {

nlohmann::json checkpoint_to_json(const PolicyParams& params, const Vocab& vocab,
                                  const nlohmann::json& meta) {
  const auto& s = params.shape();
  nlohmann::json doc;
  doc["format"] = "planlab-policy";
  doc["version"] = kCheckpointVersion;
  doc["shape"] = {{"context_dim", s.context_dim},
                  {"hidden", s.hidden},
                  {"vocab", s.vocab},
                  {"max_len", s.max_len}};
  doc["vocab"] = {{"grid_size", vocab.grid_size()},
                  {"n_waypoints", vocab.n_waypoints()},
                  {"words", vocab.words()}};
  auto& tensors = doc["tensors"] = nlohmann::json::array();
  for (const auto& t : params.layout()) {
    tensors.push_back(
        {{"name", t.name}, {"offset", t.offset}, {"rows", t.rows}, {"cols", t.cols}});
  }
  const auto& v = params.values();
  doc["values"] = std::vector<double>(v.data(), v.data() + v.size());
  doc["meta"] = meta;
  return doc;
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "planlab-policy") {
    throw std::runtime_error("not a planlab policy checkpoint");
  }
  if (doc.at("version").get<int>() != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + doc.at("version").dump());
  }
  const auto& js = doc.at("shape");
  PolicyShape shape{js.at("context_dim").get<int>(), js.at("hidden").get<int>(),
                    js.at("vocab").get<int>(), js.at("max_len").get<int>()};
  const auto& jv = doc.at("vocab");
  Vocab vocab(jv.at("grid_size").get<int>(), jv.at("n_waypoints").get<int>(),
              jv.at("words").get<std::vector<std::string>>());
  if (vocab.size() != shape.vocab) {
    throw std::runtime_error("checkpoint vocabulary does not match its shape");
  }
  PolicyParams params(shape);
  const auto layout = params.layout();
  const auto& jt = doc.at("tensors");
  if (jt.size() != layout.size()) throw std::runtime_error("checkpoint tensor list mismatch");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (jt[i].at("name").get<std::string>() != layout[i].name ||
        jt[i].at("rows").get<Eigen::Index>() != layout[i].rows ||
        jt[i].at("cols").get<Eigen::Index>() != layout[i].cols ||
        jt[i].at("offset").get<Eigen::Index>() != layout[i].offset) {
      throw std::runtime_error("checkpoint tensor '" + std::string(layout[i].name) +
                               "' has an unexpected layout");
    }
  }
  const auto values = doc.at("values").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != params.size()) {
    throw std::runtime_error("checkpoint holds " + std::to_string(values.size()) +
                             " values, shape needs " + std::to_string(params.size()));
  }
  params.values() = Eigen::Map<const Eigen::VectorXd>(values.data(), params.size());
  return Checkpoint{std::move(params), std::move(vocab), doc.value("meta", nlohmann::json::object())};
}

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params,
                     const Vocab& vocab, const nlohmann::json& meta) {
  if (!params.values().allFinite()) throw std::runtime_error("refusing to save non-finite weights");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_to_json(params, vocab, meta).dump() << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  return checkpoint_from_json(nlohmann::json::parse(in));
}

}  // namespace planlab

#include "rlbd/nn/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "rlbd/error.hpp"

namespace rlbd::nn {

using nlohmann::json;

json to_json(const Checkpoint& checkpoint) {
  const Mlp& body = checkpoint.policy.body();
  json arch = json::array();
  json weights = json::array();
  json biases = json::array();
  for (const auto& layer : body.layers()) {
    arch.push_back({{"in", layer.spec.in_dim},
                    {"out", layer.spec.out_dim},
                    {"activation", std::string(to_string(layer.spec.activation))}});
    json rows = json::array();
    for (std::size_t r = 0; r < layer.weights.rows(); ++r) {
      const auto row = layer.weights.row(r);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    weights.push_back(std::move(rows));
    biases.push_back(layer.biases);
  }

  json head;
  if (const auto* cat = std::get_if<CategoricalHead>(&checkpoint.policy.head())) {
    head = {{"kind", "categorical"}, {"action_count", cat->action_count}};
  } else {
    head = {{"kind", "gaussian"}, {"sigma_f", std::get<GaussianHead>(checkpoint.policy.head()).sigma_f}};
  }

  const auto& meta = checkpoint.metadata;
  json metadata = {{"seed", meta.seed},
                   {"env_id", meta.env_id},
                   {"train_steps", meta.train_steps},
                   {"injected", meta.injected}};
  if (meta.diverged) metadata["diverged"] = true;

  return {{"format_version", kCheckpointFormatVersion},
          {"arch", std::move(arch)},
          {"head", std::move(head)},
          {"weights", std::move(weights)},
          {"biases", std::move(biases)},
          {"metadata", std::move(metadata)}};
}

Checkpoint checkpoint_from_json(const json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw ArtifactError("unsupported checkpoint format_version");
    }
    const auto& arch = doc.at("arch");
    const auto& weights = doc.at("weights");
    const auto& biases = doc.at("biases");
    if (weights.size() != arch.size() || biases.size() != arch.size()) {
      throw ArtifactError("checkpoint arch/weights/biases lengths disagree");
    }
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l < arch.size(); ++l) {
      DenseLayer layer;
      layer.spec.in_dim = arch[l].at("in").get<std::size_t>();
      layer.spec.out_dim = arch[l].at("out").get<std::size_t>();
      layer.spec.activation = activation_from_string(arch[l].at("activation").get<std::string>());
      const auto& rows = weights[l];
      if (rows.size() != layer.spec.out_dim) {
        throw DimensionError("checkpoint layer " + std::to_string(l) + " weight rows", layer.spec.out_dim, rows.size());
      }
      layer.weights = Matrix(layer.spec.out_dim, layer.spec.in_dim);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != layer.spec.in_dim) {
          throw DimensionError("checkpoint layer " + std::to_string(l) + " weight cols", layer.spec.in_dim,
                               rows[r].size());
        }
        for (std::size_t c = 0; c < layer.spec.in_dim; ++c) layer.weights(r, c) = rows[r][c].get<double>();
      }
      layer.biases = biases[l].get<std::vector<double>>();
      layers.push_back(std::move(layer));
    }

    const auto& head_doc = doc.at("head");
    const auto kind = head_doc.at("kind").get<std::string>();
    PolicyHead head;
    if (kind == "categorical") {
      head = CategoricalHead{head_doc.at("action_count").get<std::size_t>()};
    } else if (kind == "gaussian") {
      head = GaussianHead{head_doc.at("sigma_f").get<double>()};
    } else {
      throw ArtifactError("unknown head kind '" + kind + "'");
    }

    Checkpoint checkpoint{PolicyNetwork(Mlp(std::move(layers)), head), {}};
    const auto& meta = doc.at("metadata");
    checkpoint.metadata.seed = meta.at("seed").get<std::uint64_t>();
    checkpoint.metadata.env_id = meta.at("env_id").get<std::string>();
    checkpoint.metadata.train_steps = meta.at("train_steps").get<std::uint64_t>();
    checkpoint.metadata.injected = meta.at("injected").get<bool>();
    checkpoint.metadata.diverged = meta.value("diverged", false);
    return checkpoint;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ArtifactError&) {
    throw;
  } catch (const Error& e) {
    throw ArtifactError(std::string("invalid checkpoint: ") + e.what());
  }
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) { return to_json(checkpoint).dump(1) + "\n"; }

Checkpoint parse_checkpoint(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ArtifactError("checkpoint is not valid JSON");
  return checkpoint_from_json(doc);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write checkpoint " + path.string());
  out << serialize_checkpoint(checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot read checkpoint " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_checkpoint(buffer.str());
}

}  // namespace rlbd::nn

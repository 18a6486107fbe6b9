#include "jtanet/checkpoint.hpp"

#include "jtanet/container.hpp"

namespace jtanet {

nlohmann::json config_to_json(const ModelConfig& config) {
  return {{"embedding_len", config.embedding_len},
          {"input_side", config.input_side},
          {"channel_scale", config.channel_scale}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.embedding_len = j.at("embedding_len").get<std::size_t>();
  c.input_side = j.at("input_side").get<std::size_t>();
  c.channel_scale = j.at("channel_scale").get<double>();
  c.validate();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  Container c;
  c.kind = kCheckpointKind;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& e : ck.params.entries()) {
    layers.push_back({{"name", e.name}, {"shape", e.value.shape()}, {"trainable", e.trainable}});
    c.arrays.push_back(Array::from_tensor(e.name, e.value));
  }
  c.meta = {{"config", config_to_json(ck.config)},
            {"seed", ck.seed},
            {"loss_weights",
             {{"ae", ck.weights.ae}, {"sm", ck.weights.sm}, {"fr", ck.weights.fr}, {"margin", ck.weights.margin}}},
            {"train_config", ck.train_config},
            {"layers", layers}};
  if (ck.adam) {
    const AdamState& s = *ck.adam;
    c.meta["adam"] = {{"lr", s.lr}, {"beta1", s.beta1}, {"beta2", s.beta2}, {"eps", s.eps}, {"step", s.step}};
    for (const auto& e : s.first_moment.entries()) c.arrays.push_back(Array::from_tensor("adam.m." + e.name, e.value));
    for (const auto& e : s.second_moment.entries()) {
      c.arrays.push_back(Array::from_tensor("adam.v." + e.name, e.value));
    }
  }
  write_container(path, c);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Container c = read_container(path, kCheckpointKind);
  Checkpoint ck;
  try {
    ck.config = config_from_json(c.meta.at("config"));
    ck.seed = c.meta.at("seed").get<std::uint64_t>();
    const auto& w = c.meta.at("loss_weights");
    ck.weights.ae = w.at("ae").get<double>();
    ck.weights.sm = w.at("sm").get<double>();
    ck.weights.fr = w.at("fr").get<double>();
    ck.weights.margin = w.at("margin").get<double>();
    ck.train_config = c.meta.value("train_config", nlohmann::json::object());
    for (const auto& layer : c.meta.at("layers")) {
      const auto name = layer.at("name").get<std::string>();
      ck.params.add(name, c.array(name).to_tensor(), layer.at("trainable").get<bool>());
    }
    if (c.meta.contains("adam")) {
      const auto& a = c.meta.at("adam");
      AdamState s;
      s.lr = a.at("lr").get<double>();
      s.beta1 = a.at("beta1").get<double>();
      s.beta2 = a.at("beta2").get<double>();
      s.eps = a.at("eps").get<double>();
      s.step = a.at("step").get<std::uint64_t>();
      for (const auto& e : ck.params.entries()) {
        if (!e.trainable) continue;
        s.first_moment.add(e.name, c.array("adam.m." + e.name).to_tensor());
        s.second_moment.add(e.name, c.array("adam.v." + e.name).to_tensor());
      }
      ck.adam = std::move(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad checkpoint metadata: " + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  // Parameter shapes must agree with what the stored config builds.
  const auto expected = param_layout(ck.config);
  if (expected.size() != ck.params.size()) throw FormatError(path.string() + ": parameter count mismatch");
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& a = expected[i];
    const auto& b = ck.params.entries()[i];
    if (a.name != b.name || a.shape != b.value.shape()) {
      throw FormatError(path.string() + ": parameter " + b.name + " does not match the stored config");
    }
  }
  return ck;
}

std::string params_fingerprint(const ModelParams& params) {
  std::string buf;
  for (const auto& e : params.entries()) {
    buf += e.name;
    buf += shape_to_string(e.value.shape());
    buf.append(reinterpret_cast<const char*>(e.value.data().data()), e.value.size() * sizeof(double));
  }
  return fnv1a_hex(buf.data(), buf.size());
}

}  // namespace jtanet

#include "serialize.hpp"

#include "mtoo/errors.hpp"

namespace mtoo::detail {

nlohmann::json network_to_json(const nn::Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    const auto& s = layer->spec();
    nlohmann::json j;
    j["kind"] = nn::to_string(s.kind);
    j["activation"] = nn::to_string(s.activation);
    j["in_size"] = s.in_size;
    j["out_size"] = s.out_size;
    j["in_channels"] = s.in_channels;
    j["out_channels"] = s.out_channels;
    j["kernel"] = s.kernel;
    j["stride"] = s.stride;
    j["padding"] = s.padding;
    j["length"] = s.length;
    const auto& p = layer->params();
    j["params"] = std::vector<double>(p.data(), p.data() + p.size());
    layers.push_back(std::move(j));
  }
  return nlohmann::json{{"layers", std::move(layers)}};
}

nn::Network network_from_json(const nlohmann::json& j) {
  std::vector<nn::LayerSpec> specs;
  std::vector<std::vector<double>> params;
  for (const auto& lj : j.at("layers")) {
    nn::LayerSpec s;
    s.kind = nn::layer_kind_from_string(lj.at("kind").get<std::string>());
    s.activation = nn::activation_from_string(lj.at("activation").get<std::string>());
    s.in_size = lj.at("in_size").get<int>();
    s.out_size = lj.at("out_size").get<int>();
    s.in_channels = lj.at("in_channels").get<int>();
    s.out_channels = lj.at("out_channels").get<int>();
    s.kernel = lj.at("kernel").get<int>();
    s.stride = lj.at("stride").get<int>();
    s.padding = lj.at("padding").get<int>();
    s.length = lj.at("length").get<int>();
    specs.push_back(s);
    params.push_back(lj.at("params").get<std::vector<double>>());
  }
  nn::Network net(std::move(specs));
  auto layers = net.layer_ptrs();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (static_cast<Eigen::Index>(params[i].size()) != layers[i]->params().size())
      throw DataError("bundle: layer parameter count mismatch");
    layers[i]->params() =
        Eigen::Map<const Eigen::VectorXd>(params[i].data(), static_cast<Eigen::Index>(params[i].size()));
  }
  return net;
}

nlohmann::json stats_to_json(const NormalizationStats& st) {
  nlohmann::json j;
  j["vec_min"] = st.vec_min;
  j["vec_max"] = st.vec_max;
  j["kpi_min"] = st.kpi_min;
  j["kpi_max"] = st.kpi_max;
  return j;
}

NormalizationStats stats_from_json(const nlohmann::json& j) {
  NormalizationStats st;
  st.vec_min = j.at("vec_min").get<std::vector<double>>();
  st.vec_max = j.at("vec_max").get<std::vector<double>>();
  st.kpi_min = j.at("kpi_min").get<std::array<double, 3>>();
  st.kpi_max = j.at("kpi_max").get<std::array<double, 3>>();
  return st;
}

}  // namespace mtoo::detail

#include "ivdnet/connectivity.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ivdnet/error.hpp"

namespace ivdnet::plan {

std::string_view to_string(ConnectivityMode mode) {
  switch (mode) {
    case ConnectivityMode::plain: return "plain";
    case ConnectivityMode::dense_within_stream: return "dense_within_stream";
    case ConnectivityMode::hyper_dense: return "hyper_dense";
  }
  return "unknown";
}

ConnectivityMode parse_connectivity_mode(std::string_view name) {
  if (name == "plain") return ConnectivityMode::plain;
  if (name == "dense_within_stream" || name == "dense") return ConnectivityMode::dense_within_stream;
  if (name == "hyper_dense" || name == "hyper-dense") return ConnectivityMode::hyper_dense;
  throw ValidationError("unknown connectivity mode '" + std::string(name) + "'");
}

std::string to_string(const SourceRef& ref) {
  return "x" + std::to_string(ref.layer) + "^" + std::to_string(ref.stream);
}

const std::vector<SourceRef>& ConnectivityPlan::inputs(int layer, int stream) const {
  if (layer < 1 || layer > num_layers())
    throw std::out_of_range("layer " + std::to_string(layer) + " outside 1.." +
                            std::to_string(num_layers()));
  if (stream < 1 || stream > num_streams)
    throw std::out_of_range("stream " + std::to_string(stream) + " outside 1.." +
                            std::to_string(num_streams));
  return per_layer_inputs[layer - 1][stream - 1];
}

int ConnectivityPlan::channels_of(const SourceRef& ref) const {
  if (ref.layer == 0) return raw_channels;
  return growth.at(ref.layer - 1);
}

int ConnectivityPlan::bridge_input_channels() const {
  int total = 0;
  for (const auto& ref : bridge_inputs) total += channels_of(ref);
  return total;
}

std::vector<SourceRef> permutation_for(int stream, int num_streams,
                                       const std::vector<SourceRef>& sources) {
  if (num_streams < 1 || stream < 1 || stream > num_streams)
    throw ValidationError("stream index outside 1..num_streams");
  if (sources.size() % static_cast<std::size_t>(num_streams) != 0)
    throw ValidationError("source list is not made of whole per-layer blocks");

  std::vector<SourceRef> out = sources;
  const auto block = static_cast<std::ptrdiff_t>(num_streams);
  const auto shift = static_cast<std::ptrdiff_t>(stream - 1);
  for (auto it = out.begin(); it != out.end(); it += block)
    std::rotate(it, it + shift, it + block);
  return out;
}

namespace {

// Canonical (unpermuted) sources of a layer that sits after `previous`
// encoder layers, newest block first.
std::vector<SourceRef> canonical_sources(ConnectivityMode mode, int num_streams,
                                         int stream, int previous) {
  std::vector<SourceRef> refs;
  switch (mode) {
    case ConnectivityMode::plain:
      refs.push_back({stream, previous});
      break;
    case ConnectivityMode::dense_within_stream:
      for (int k = previous; k >= 1; --k) refs.push_back({stream, k});
      break;
    case ConnectivityMode::hyper_dense:
      for (int k = previous; k >= 1; --k)
        for (int s = 1; s <= num_streams; ++s) refs.push_back({s, k});
      break;
  }
  return refs;
}

}  // namespace

ConnectivityPlan build_plan(int num_streams, const std::vector<int>& growth,
                            ConnectivityMode mode, int raw_channels, bool permute) {
  if (num_streams < 1) throw ValidationError("num_streams must be >= 1");
  if (growth.empty()) throw ValidationError("growth schedule must not be empty");
  if (std::any_of(growth.begin(), growth.end(), [](int c) { return c < 1; }))
    throw ValidationError("growth entries must be >= 1");
  if (raw_channels < 1) throw ValidationError("raw_channels must be >= 1");

  ConnectivityPlan plan;
  plan.num_streams = num_streams;
  plan.growth = growth;
  plan.mode = mode;
  plan.raw_channels = raw_channels;
  plan.permuted = permute;

  const int layers = static_cast<int>(growth.size());
  plan.per_layer_inputs.resize(layers);
  for (int l = 1; l <= layers; ++l) {
    auto& row = plan.per_layer_inputs[l - 1];
    row.reserve(num_streams);
    for (int s = 1; s <= num_streams; ++s) {
      if (l == 1) {
        row.push_back({SourceRef{s, 0}});
        continue;
      }
      auto refs = canonical_sources(mode, num_streams, s, l - 1);
      if (permute && mode == ConnectivityMode::hyper_dense)
        refs = permutation_for(s, num_streams, refs);
      row.push_back(std::move(refs));
    }
  }

  if (mode == ConnectivityMode::hyper_dense) {
    plan.bridge_inputs = canonical_sources(mode, num_streams, 1, layers);
  } else {
    for (int s = 1; s <= num_streams; ++s) {
      auto refs = canonical_sources(mode, num_streams, s, layers);
      plan.bridge_inputs.insert(plan.bridge_inputs.end(), refs.begin(), refs.end());
    }
  }
  return plan;
}

int input_channels(const ConnectivityPlan& plan, int layer, int stream) {
  const auto& refs = plan.inputs(layer, stream);
  return std::accumulate(refs.begin(), refs.end(), 0, [&](int acc, const SourceRef& r) {
    return acc + plan.channels_of(r);
  });
}

namespace {

std::string join_refs(const std::vector<SourceRef>& refs) {
  std::string out;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (i) out += ",";
    out += to_string(refs[i]);
  }
  return out;
}

}  // namespace

std::string format_table(const ConnectivityPlan& plan) {
  std::ostringstream os;
  os << "mode " << to_string(plan.mode) << ", streams " << plan.num_streams
     << (plan.permuted ? ", permuted" : "") << "\n";
  os << "layer  stream  in_ch  out_ch  inputs\n";
  for (int l = 1; l <= plan.num_layers(); ++l) {
    for (int s = 1; s <= plan.num_streams; ++s) {
      char head[64];
      std::snprintf(head, sizeof head, "%5d  %6d  %5d  %6d  ", l, s, input_channels(plan, l, s),
                    plan.growth[l - 1]);
      os << head << join_refs(plan.inputs(l, s)) << "\n";
    }
  }
  char head[64];
  std::snprintf(head, sizeof head, "%5s  %6s  %5d  %6s  ", "bridge", "-", plan.bridge_input_channels(), "-");
  os << head << join_refs(plan.bridge_inputs) << "\n";
  os << "bridge input channels: " << plan.bridge_input_channels() << "\n";
  return os.str();
}

std::string format_json(const ConnectivityPlan& plan) {
  using nlohmann::json;
  auto refs_json = [](const std::vector<SourceRef>& refs) {
    json arr = json::array();
    for (const auto& r : refs) arr.push_back({{"stream", r.stream}, {"layer", r.layer}});
    return arr;
  };
  json doc;
  doc["mode"] = std::string(to_string(plan.mode));
  doc["num_streams"] = plan.num_streams;
  doc["growth"] = plan.growth;
  doc["raw_channels"] = plan.raw_channels;
  doc["permuted"] = plan.permuted;
  doc["layers"] = json::array();
  for (int l = 1; l <= plan.num_layers(); ++l)
    for (int s = 1; s <= plan.num_streams; ++s)
      doc["layers"].push_back({{"layer", l},
                               {"stream", s},
                               {"in_channels", input_channels(plan, l, s)},
                               {"out_channels", plan.growth[l - 1]},
                               {"inputs", refs_json(plan.inputs(l, s))}});
  doc["bridge"] = {{"in_channels", plan.bridge_input_channels()},
                   {"inputs", refs_json(plan.bridge_inputs)}};
  return doc.dump(2);
}

}  // namespace ivdnet::plan

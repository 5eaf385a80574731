#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Symbolic wiring of the multi-stream encoder. Streams and layers are
// 1-based, matching the x_l^s notation; layer 0 denotes a stream's raw
// modality input. Nothing here allocates weights or touches tensors.
namespace ivdnet::plan {

enum class ConnectivityMode { plain, dense_within_stream, hyper_dense };

std::string_view to_string(ConnectivityMode mode);
ConnectivityMode parse_connectivity_mode(std::string_view name);

/// One feature map feeding a layer: the output of `layer` in `stream`.
struct SourceRef {
  int stream = 0;
  int layer = 0;

  friend auto operator<=>(const SourceRef&, const SourceRef&) = default;
};

std::string to_string(const SourceRef& ref);

struct ConnectivityPlan {
  int num_streams = 0;
  std::vector<int> growth;  // output channels c_1..c_L
  ConnectivityMode mode = ConnectivityMode::plain;
  int raw_channels = 1;     // channels of each stream's layer-0 input
  bool permuted = true;

  // per_layer_inputs[l-1][s-1] is the ordered input list of H_l^s.
  std::vector<std::vector<std::vector<SourceRef>>> per_layer_inputs;
  // Sources concatenated into the bridge that follows layer L.
  std::vector<SourceRef> bridge_inputs;

  int num_layers() const { return static_cast<int>(growth.size()); }
  const std::vector<SourceRef>& inputs(int layer, int stream) const;
  /// Channel count of a single source reference.
  int channels_of(const SourceRef& ref) const;
  int bridge_input_channels() const;
};

/// Builds the wiring for `num_streams` encoders of `growth.size()` layers.
/// In hyper_dense mode, layer l >= 2 of every stream receives the outputs of
/// all layers k < l of all streams, reordered per stream by
/// permutation_for() when `permute` is set.
ConnectivityPlan build_plan(int num_streams, const std::vector<int>& growth,
                            ConnectivityMode mode, int raw_channels = 1,
                            bool permute = true);

/// Sum of channel counts over inputs(layer, stream). Throws std::out_of_range
/// for layer outside 1..L or stream outside 1..M.
int input_channels(const ConnectivityPlan& plan, int layer, int stream);

/// Reorders a source list laid out as interleaved per-layer blocks
/// [x_{l-1}^1..x_{l-1}^M, x_{l-2}^1..x_{l-2}^M, ...]: every block is rotated
/// left by (stream - 1), so stream s sees its own map first. Stream 1 is the
/// identity. Throws ValidationError when the list length is not a multiple
/// of `num_streams`.
std::vector<SourceRef> permutation_for(int stream, int num_streams,
                                       const std::vector<SourceRef>& sources);

/// Human-readable table: layer, stream, input refs, in-channels, out-channels.
std::string format_table(const ConnectivityPlan& plan);
/// Machine-readable form of the same rows, as a JSON document.
std::string format_json(const ConnectivityPlan& plan);

}  // namespace ivdnet::plan

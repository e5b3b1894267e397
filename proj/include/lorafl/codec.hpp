#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "lorafl/errors.hpp"

namespace lorafl::codec {

// ---------------------------------------------------------------------------
// Stage configuration
// ---------------------------------------------------------------------------

struct PipelineConfig {
  double sparsify_threshold = 0.001;  // magnitudes strictly below are zeroed
  int quant_bits = 4;                 // one of 1, 2, 4, 32 (32 = pass-through)
  double fec_rate = 0.5;              // r = k/n, in (0, 1]
  bool differential_uplink = true;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Stage operations
// ---------------------------------------------------------------------------

std::vector<double> sparsify(std::span<const double> v, double threshold);

// Zero-centered uniform quantizer on 2^bits - 1 levels spanning
// [-(1 - 1/(2^bits-1)) * scale, +...], scale = max |v[i]|. Zero is always a
// level, and per-element round-trip error is at most scale / (2^bits - 1).
// bits = 1 is the sign quantizer {-scale, +scale}.
std::vector<std::uint8_t> quantize_codes(std::span<const double> v, int bits,
                                         double& scale_out);
std::vector<double> dequantize_codes(std::span<const std::uint8_t> codes, int bits,
                                     double scale);

// Little-endian bit packing of codes (bits per code in {1, 2, 4}).
std::vector<std::uint8_t> pack_codes(std::span<const std::uint8_t> codes, int bits);
std::vector<std::uint8_t> unpack_codes(std::span<const std::uint8_t> bytes, int bits,
                                       std::size_t count);

// RFC 1950 stream, fixed compression level for reproducibility.
std::vector<std::uint8_t> zlib_compress(std::span<const std::uint8_t> in);
std::vector<std::uint8_t> zlib_decompress(std::span<const std::uint8_t> in);

std::vector<double> diff_encode(std::span<const double> local,
                                std::span<const double> global);
std::vector<double> diff_apply(std::span<const double> global,
                               std::span<const double> diff);

// k = ceil(U / b) fragments of b bytes each, last one zero-padded.
std::vector<std::vector<std::uint8_t>> fragment(std::span<const std::uint8_t> payload,
                                                int fragment_bytes);
std::vector<std::uint8_t> reassemble_source(
    const std::vector<std::vector<std::uint8_t>>& fragments, std::size_t original_len);

// n = ceil(k / r) for r in (0, 1].
int fec_fragment_count(int k, double rate);

// Erasure-code bookkeeping: with an MDS code any k distinct coded fragments
// decode, so decodability is a pure cardinality threshold.
struct FragmentSet {
  std::set<int> received_ids;
  int k_required = 0;
  void add(int id) { received_ids.insert(id); }
};

bool fec_decodable(const FragmentSet& received);

// ---------------------------------------------------------------------------
// Whole-update pipeline: sparsify -> quantize -> compress -> fragment -> FEC
// ---------------------------------------------------------------------------
//
// Wire layout (byte_size() counts all of it):
//   [u32 LE uncompressed code-stream length]
//   [f32 LE quantizer scale]
//   [u8 bits] [u8 flags: bit0 = differential]
//   [RFC 1950 compressed code stream]
// Each coded fragment carries a 2-byte LE index header, so the per-frame data
// budget is MTU - 2 bytes and every frame is exactly MTU bytes on air.

inline constexpr int kWireHeaderBytes = 10;
inline constexpr int kFragmentIndexBytes = 2;

struct EncodedUpdate {
  std::vector<std::uint8_t> wire;  // header + compressed stream
  int k = 0;
  int n = 0;
  int fragment_data_bytes = 0;  // b_effective = MTU - 2
  double quant_scale = 0.0;
  int quant_bits = 32;
  bool differential = false;
  std::size_t element_count = 0;

  std::size_t byte_size() const { return wire.size(); }
  // Frame payload of coded fragment `index` (index header + data or parity),
  // always fragment_data_bytes + 2 bytes.
  std::vector<std::uint8_t> coded_fragment(int index) const;
  // Exact pre-fragmentation bytes; requires a decodable set.
  std::vector<std::uint8_t> reassemble(const FragmentSet& received) const;
};

EncodedUpdate encode_update(std::span<const double> values, const PipelineConfig& cfg,
                            int mtu_bytes, const std::vector<double>* global = nullptr);

std::vector<double> decode_update(std::span<const std::uint8_t> wire,
                                  std::size_t element_count,
                                  const std::vector<double>* global = nullptr);

}  // namespace lorafl::codec

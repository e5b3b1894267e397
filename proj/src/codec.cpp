#include "lorafl/codec.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <string>

namespace lorafl::codec {

namespace {

constexpr int kZlibLevel = 6;  // pinned so identical inputs give identical streams

void store_u32le(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v & 0xff);
  p[1] = static_cast<std::uint8_t>((v >> 8) & 0xff);
  p[2] = static_cast<std::uint8_t>((v >> 16) & 0xff);
  p[3] = static_cast<std::uint8_t>((v >> 24) & 0xff);
}

std::uint32_t load_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void store_f32le(std::uint8_t* p, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  store_u32le(p, bits);
}

float load_f32le(const std::uint8_t* p) {
  const std::uint32_t bits = load_u32le(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

int levels_per_side(int bits) { return (1 << (bits - 1)) - 1; }

}  // namespace

void PipelineConfig::validate() const {
  if (!(sparsify_threshold >= 0))
    throw ConfigError("codec.sparsify_threshold must be nonnegative");
  if (quant_bits != 1 && quant_bits != 2 && quant_bits != 4 && quant_bits != 32)
    throw ConfigError("codec.quant_bits must be one of 1, 2, 4, 32");
  if (!(fec_rate > 0.0 && fec_rate <= 1.0))
    throw ConfigError("codec.fec_rate must be in (0, 1]");
}

std::vector<double> sparsify(std::span<const double> v, double threshold) {
  if (!(threshold >= 0)) throw std::invalid_argument("sparsify: threshold must be >= 0");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = std::abs(v[i]) < threshold ? 0.0 : v[i];
  return out;
}

std::vector<std::uint8_t> quantize_codes(std::span<const double> v, int bits,
                                         double& scale_out) {
  if (bits != 1 && bits != 2 && bits != 4)
    throw std::invalid_argument("quantize_codes: bits must be 1, 2, or 4");
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  scale_out = scale;
  std::vector<std::uint8_t> codes(v.size());
  if (bits == 1) {
    for (std::size_t i = 0; i < v.size(); ++i) codes[i] = v[i] >= 0.0 ? 1 : 0;
    return codes;
  }
  const int half = levels_per_side(bits);
  if (scale == 0.0) {
    for (auto& c : codes) c = static_cast<std::uint8_t>(half);
    return codes;
  }
  const double step = 2.0 * scale / ((1 << bits) - 1);
  for (std::size_t i = 0; i < v.size(); ++i) {
    long m = std::lround(v[i] / step);
    m = std::clamp(m, static_cast<long>(-half), static_cast<long>(half));
    codes[i] = static_cast<std::uint8_t>(m + half);
  }
  return codes;
}

std::vector<double> dequantize_codes(std::span<const std::uint8_t> codes, int bits,
                                     double scale) {
  if (bits != 1 && bits != 2 && bits != 4)
    throw std::invalid_argument("dequantize_codes: bits must be 1, 2, or 4");
  std::vector<double> out(codes.size());
  if (bits == 1) {
    for (std::size_t i = 0; i < codes.size(); ++i) out[i] = codes[i] ? scale : -scale;
    return out;
  }
  const int half = levels_per_side(bits);
  const double step = scale == 0.0 ? 0.0 : 2.0 * scale / ((1 << bits) - 1);
  for (std::size_t i = 0; i < codes.size(); ++i)
    out[i] = (static_cast<int>(codes[i]) - half) * step;
  return out;
}

std::vector<std::uint8_t> pack_codes(std::span<const std::uint8_t> codes, int bits) {
  if (bits != 1 && bits != 2 && bits != 4)
    throw std::invalid_argument("pack_codes: bits must be 1, 2, or 4");
  const int per_byte = 8 / bits;
  std::vector<std::uint8_t> out((codes.size() + static_cast<std::size_t>(per_byte) - 1) /
                                static_cast<std::size_t>(per_byte));
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const std::size_t byte = i / static_cast<std::size_t>(per_byte);
    const int shift = static_cast<int>(i % static_cast<std::size_t>(per_byte)) * bits;
    out[byte] = static_cast<std::uint8_t>(out[byte] | (codes[i] << shift));
  }
  return out;
}

std::vector<std::uint8_t> unpack_codes(std::span<const std::uint8_t> bytes, int bits,
                                       std::size_t count) {
  if (bits != 1 && bits != 2 && bits != 4)
    throw std::invalid_argument("unpack_codes: bits must be 1, 2, or 4");
  const int per_byte = 8 / bits;
  const std::size_t need =
      (count + static_cast<std::size_t>(per_byte) - 1) / static_cast<std::size_t>(per_byte);
  if (bytes.size() < need) throw CodecError("unpack_codes: byte stream too short");
  const std::uint8_t mask = static_cast<std::uint8_t>((1 << bits) - 1);
  std::vector<std::uint8_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t byte = i / static_cast<std::size_t>(per_byte);
    const int shift = static_cast<int>(i % static_cast<std::size_t>(per_byte)) * bits;
    out[i] = static_cast<std::uint8_t>((bytes[byte] >> shift) & mask);
  }
  return out;
}

std::vector<std::uint8_t> zlib_compress(std::span<const std::uint8_t> in) {
  uLongf bound = compressBound(static_cast<uLong>(in.size()));
  std::vector<std::uint8_t> out(bound);
  const int rc = compress2(out.data(), &bound, in.empty() ? reinterpret_cast<const Bytef*>("") : in.data(),
                           static_cast<uLong>(in.size()), kZlibLevel);
  if (rc != Z_OK) throw CodecError("zlib_compress failed: rc=" + std::to_string(rc));
  out.resize(bound);
  return out;
}

std::vector<std::uint8_t> zlib_decompress(std::span<const std::uint8_t> in) {
  z_stream strm{};
  if (inflateInit(&strm) != Z_OK) throw CodecError("zlib_decompress: inflateInit failed");
  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 16];
  strm.next_in = const_cast<Bytef*>(in.data());
  strm.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  do {
    strm.next_out = chunk;
    strm.avail_out = sizeof(chunk);
    rc = inflate(&strm, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&strm);
      throw CodecError("zlib_decompress: corrupt stream (rc=" + std::to_string(rc) + ")");
    }
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - strm.avail_out));
  } while (rc != Z_STREAM_END && (strm.avail_in > 0 || strm.avail_out == 0));
  inflateEnd(&strm);
  if (rc != Z_STREAM_END) throw CodecError("zlib_decompress: truncated stream");
  return out;
}

std::vector<double> diff_encode(std::span<const double> local,
                                std::span<const double> global) {
  if (local.size() != global.size())
    throw std::invalid_argument("diff_encode: length mismatch");
  std::vector<double> out(local.size());
  for (std::size_t i = 0; i < local.size(); ++i) out[i] = local[i] - global[i];
  return out;
}

std::vector<double> diff_apply(std::span<const double> global,
                               std::span<const double> diff) {
  if (global.size() != diff.size())
    throw std::invalid_argument("diff_apply: length mismatch");
  std::vector<double> out(global.size());
  for (std::size_t i = 0; i < global.size(); ++i) out[i] = global[i] + diff[i];
  return out;
}

std::vector<std::vector<std::uint8_t>> fragment(std::span<const std::uint8_t> payload,
                                                int fragment_bytes) {
  if (fragment_bytes <= 0)
    throw std::invalid_argument("fragment: fragment size must be positive");
  if (payload.empty()) throw std::invalid_argument("fragment: payload must be non-empty");
  const std::size_t b = static_cast<std::size_t>(fragment_bytes);
  const std::size_t k = (payload.size() + b - 1) / b;
  std::vector<std::vector<std::uint8_t>> frags(k);
  for (std::size_t i = 0; i < k; ++i) {
    frags[i].assign(b, 0);
    const std::size_t off = i * b;
    const std::size_t len = std::min(b, payload.size() - off);
    std::memcpy(frags[i].data(), payload.data() + off, len);
  }
  return frags;
}

std::vector<std::uint8_t> reassemble_source(
    const std::vector<std::vector<std::uint8_t>>& fragments, std::size_t original_len) {
  std::vector<std::uint8_t> out;
  for (const auto& f : fragments) out.insert(out.end(), f.begin(), f.end());
  if (out.size() < original_len)
    throw CodecError("reassemble_source: fragments shorter than original length");
  out.resize(original_len);
  return out;
}

int fec_fragment_count(int k, double rate) {
  if (k <= 0) throw std::invalid_argument("fec_fragment_count: k must be positive");
  if (!(rate > 0.0 && rate <= 1.0))
    throw std::invalid_argument("fec_fragment_count: rate must be in (0, 1]");
  return static_cast<int>(std::ceil(static_cast<double>(k) / rate));
}

bool fec_decodable(const FragmentSet& received) {
  return static_cast<int>(received.received_ids.size()) >= received.k_required;
}

std::vector<std::uint8_t> EncodedUpdate::coded_fragment(int index) const {
  if (index < 0 || index >= n)
    throw std::invalid_argument("coded_fragment: index out of range");
  const std::size_t b = static_cast<std::size_t>(fragment_data_bytes);
  std::vector<std::uint8_t> frame(b + kFragmentIndexBytes, 0);
  frame[0] = static_cast<std::uint8_t>(index & 0xff);
  frame[1] = static_cast<std::uint8_t>((index >> 8) & 0xff);
  if (index < k) {
    const std::size_t off = static_cast<std::size_t>(index) * b;
    const std::size_t len = std::min(b, wire.size() - off);
    std::memcpy(frame.data() + kFragmentIndexBytes, wire.data() + off, len);
  } else {
    // Parity placeholder: a rotated XOR of the source fragments. Reception is
    // tracked combinatorially, so these bytes are only ever a stand-in.
    for (std::size_t j = 0; j < b; ++j) {
      std::uint8_t acc = 0;
      for (int s = 0; s < k; ++s) {
        const std::size_t off =
            static_cast<std::size_t>(s) * b + (j + static_cast<std::size_t>(index)) % b;
        if (off < wire.size()) acc = static_cast<std::uint8_t>(acc ^ wire[off]);
      }
      frame[kFragmentIndexBytes + j] = acc;
    }
  }
  return frame;
}

std::vector<std::uint8_t> EncodedUpdate::reassemble(const FragmentSet& received) const {
  for (int id : received.received_ids)
    if (id < 0 || id >= n)
      throw std::invalid_argument("reassemble: fragment index out of range");
  if (!fec_decodable(received))
    throw CodecError("reassemble: undecodable set (" +
                     std::to_string(received.received_ids.size()) + " of " +
                     std::to_string(k) + " required fragments)");
  return wire;
}

EncodedUpdate encode_update(std::span<const double> values, const PipelineConfig& cfg,
                            int mtu_bytes, const std::vector<double>* global) {
  cfg.validate();
  if (mtu_bytes <= kFragmentIndexBytes)
    throw std::invalid_argument("encode_update: MTU too small for fragment header");

  EncodedUpdate out;
  out.differential = global != nullptr;
  out.quant_bits = cfg.quant_bits;
  out.element_count = values.size();

  std::vector<double> work =
      out.differential ? diff_encode(values, *global) : std::vector<double>(values.begin(), values.end());
  work = sparsify(work, cfg.sparsify_threshold);

  std::vector<std::uint8_t> stream;
  if (cfg.quant_bits == 32) {
    // Pass-through: full-precision little-endian doubles, exact round trip.
    stream.resize(work.size() * sizeof(double));
    std::memcpy(stream.data(), work.data(), stream.size());
    out.quant_scale = 0.0;
  } else {
    double scale = 0.0;
    const auto codes = quantize_codes(work, cfg.quant_bits, scale);
    stream = pack_codes(codes, cfg.quant_bits);
    out.quant_scale = scale;
  }

  const auto compressed = zlib_compress(stream);
  out.wire.resize(kWireHeaderBytes + compressed.size());
  store_u32le(out.wire.data(), static_cast<std::uint32_t>(stream.size()));
  store_f32le(out.wire.data() + 4, static_cast<float>(out.quant_scale));
  out.wire[8] = static_cast<std::uint8_t>(cfg.quant_bits);
  out.wire[9] = out.differential ? 1 : 0;
  std::memcpy(out.wire.data() + kWireHeaderBytes, compressed.data(), compressed.size());

  out.fragment_data_bytes = mtu_bytes - kFragmentIndexBytes;
  const std::size_t b = static_cast<std::size_t>(out.fragment_data_bytes);
  out.k = static_cast<int>((out.wire.size() + b - 1) / b);
  out.n = fec_fragment_count(out.k, cfg.fec_rate);
  return out;
}

std::vector<double> decode_update(std::span<const std::uint8_t> wire,
                                  std::size_t element_count,
                                  const std::vector<double>* global) {
  if (wire.size() < kWireHeaderBytes) throw CodecError("decode_update: wire too short");
  const std::uint32_t stream_len = load_u32le(wire.data());
  const double scale = static_cast<double>(load_f32le(wire.data() + 4));
  const int bits = wire[8];
  const bool differential = (wire[9] & 1) != 0;

  const auto stream = zlib_decompress(wire.subspan(kWireHeaderBytes));
  if (stream.size() != stream_len)
    throw CodecError("decode_update: stream length mismatch");

  std::vector<double> values;
  if (bits == 32) {
    if (stream.size() != element_count * sizeof(double))
      throw CodecError("decode_update: element count mismatch");
    values.resize(element_count);
    std::memcpy(values.data(), stream.data(), stream.size());
  } else if (bits == 1 || bits == 2 || bits == 4) {
    const auto codes = unpack_codes(stream, bits, element_count);
    values = dequantize_codes(codes, bits, scale);
  } else {
    throw CodecError("decode_update: invalid bits field");
  }

  if (differential) {
    if (global == nullptr)
      throw std::invalid_argument("decode_update: differential payload needs the global model");
    return diff_apply(*global, values);
  }
  return values;
}

}  // namespace lorafl::codec

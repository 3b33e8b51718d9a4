#include "binnet/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "binnet/common.hpp"

namespace binnet {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

constexpr char kMagic[4] = {'B', 'N', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }

  void put_bytes(const void* p, std::size_t len) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + len);
  }

  void put_string(const std::string& s) {
    put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
    put_bytes(s.data(), s.size());
  }

  void put_tensor(const Tensor& t) {
    put<std::uint8_t>(static_cast<std::uint8_t>(t.ndim()));
    for (int d = 0; d < t.ndim(); ++d) put<std::int64_t>(t.dim(d));
    put_bytes(t.data(), static_cast<std::size_t>(t.numel()) * sizeof(float));
  }

  const std::vector<std::uint8_t>& bytes() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(std::vector<std::uint8_t> bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + at_, sizeof(T));
    at_ += sizeof(T);
    return v;
  }

  std::string get_string() {
    const auto len = get<std::uint16_t>();
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + at_), len);
    at_ += len;
    return s;
  }

  Tensor get_tensor() {
    const int ndim = get<std::uint8_t>();
    if (ndim < 1 || ndim > 4)
      throw FormatError(path_ + ": tensor rank " + std::to_string(ndim) +
                        " out of range at byte " + std::to_string(at_));
    std::vector<std::int64_t> shape(static_cast<std::size_t>(ndim));
    for (auto& d : shape) d = get<std::int64_t>();
    Tensor t(shape);
    const std::size_t len = static_cast<std::size_t>(t.numel()) * sizeof(float);
    need(len);
    std::memcpy(t.data(), bytes_.data() + at_, len);
    at_ += len;
    return t;
  }

  void finish() const {
    if (at_ != bytes_.size())
      throw FormatError(path_ + ": " + std::to_string(bytes_.size() - at_) +
                        " unexpected trailing bytes");
  }

  std::size_t at() const { return at_; }

 private:
  void need(std::size_t len) const {
    if (at_ + len > bytes_.size())
      throw FormatError(path_ + ": truncated checkpoint at byte " +
                        std::to_string(at_));
  }

  std::vector<std::uint8_t> bytes_;
  std::string path_;
  std::size_t at_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, TrainState& state) {
  Writer w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(state.cfg.regularizer));
  w.put<double>(state.cfg.eta0);
  w.put<double>(state.cfg.momentum);
  w.put<std::int32_t>(state.cfg.batch_size);
  w.put<std::int32_t>(state.cfg.epochs);
  w.put<std::uint64_t>(state.cfg.seed);
  w.put_string(state.net.preset);
  w.put<std::int64_t>(state.net.in_channels);
  w.put<std::int64_t>(state.net.in_height);
  w.put<std::int64_t>(state.net.in_width);
  w.put<std::int64_t>(state.net.classes);
  w.put<std::int32_t>(state.opt.epoch);
  w.put<double>(state.opt.eta);
  w.put<std::uint64_t>(state.stoch_rng.state());

  w.put<std::uint32_t>(static_cast<std::uint32_t>(state.net.layers.size()));
  for (auto& layer : state.net.layers) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(layer->kind()));
    switch (layer->kind()) {
      case LayerKind::kDense: {
        auto* dense = static_cast<DenseLayer*>(layer.get());
        w.put<std::int64_t>(dense->in_features());
        w.put<std::int64_t>(dense->out_features());
        w.put_tensor(dense->weights());
        w.put_tensor(dense->bias());
        break;
      }
      case LayerKind::kConv: {
        auto* conv = static_cast<ConvLayer*>(layer.get());
        w.put<std::int64_t>(conv->in_channels());
        w.put<std::int64_t>(conv->out_channels());
        w.put<std::int64_t>(conv->kernel());
        w.put<std::int32_t>(conv->stride());
        w.put<std::int32_t>(conv->pad());
        w.put_tensor(conv->kernels());
        w.put_tensor(conv->bias());
        break;
      }
      case LayerKind::kBatchNorm: {
        auto* bn = static_cast<BatchNormLayer*>(layer.get());
        w.put<std::int64_t>(bn->channels());
        w.put<float>(bn->eps());
        w.put<float>(bn->momentum());
        w.put_tensor(bn->gamma());
        w.put_tensor(bn->beta());
        w.put_tensor(bn->running_mean());
        w.put_tensor(bn->running_var());
        break;
      }
      case LayerKind::kMaxPool: {
        auto* pool = static_cast<MaxPoolLayer*>(layer.get());
        w.put<std::int32_t>(pool->window());
        w.put<std::int32_t>(pool->stride());
        break;
      }
      case LayerKind::kRelu:
      case LayerKind::kFlatten:
        break;
    }
  }

  w.put<std::uint32_t>(static_cast<std::uint32_t>(state.opt.velocity.size()));
  for (const Tensor& v : state.opt.velocity) w.put_tensor(v);

  // Write-then-rename so a failed write never leaves a torn checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out.write(reinterpret_cast<const char*>(w.bytes().data()),
              static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw IoError("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("cannot rename " + tmp + " to " + path);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path);

  char magic[4];
  for (char& c : magic) c = r.get<char>();
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(path + ": bad checkpoint magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion)
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(version) + " (expected " +
                      std::to_string(kVersion) + ")");

  TrainState st;
  const auto reg = r.get<std::uint8_t>();
  if (reg > 2)
    throw FormatError(path + ": unknown regularizer tag " +
                      std::to_string(int(reg)));
  st.cfg.regularizer = static_cast<Regularizer>(reg);
  st.cfg.eta0 = r.get<double>();
  st.cfg.momentum = r.get<double>();
  st.cfg.batch_size = r.get<std::int32_t>();
  st.cfg.epochs = r.get<std::int32_t>();
  st.cfg.seed = r.get<std::uint64_t>();
  st.net.preset = r.get_string();
  st.net.in_channels = r.get<std::int64_t>();
  st.net.in_height = r.get<std::int64_t>();
  st.net.in_width = r.get<std::int64_t>();
  st.net.classes = r.get<std::int64_t>();
  st.opt.epoch = r.get<std::int32_t>();
  st.opt.eta = r.get<double>();
  st.stoch_rng.set_state(r.get<std::uint64_t>());

  const auto layer_count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    const auto kind = r.get<std::uint8_t>();
    switch (static_cast<LayerKind>(kind)) {
      case LayerKind::kDense: {
        const auto in = r.get<std::int64_t>();
        const auto out = r.get<std::int64_t>();
        auto dense = std::make_unique<DenseLayer>(in, out);
        dense->weights() = r.get_tensor();
        dense->bias() = r.get_tensor();
        if (dense->weights().numel() != in * out ||
            dense->bias().numel() != out)
          throw FormatError(path + ": dense layer tensor shape mismatch");
        st.net.layers.push_back(std::move(dense));
        break;
      }
      case LayerKind::kConv: {
        const auto in = r.get<std::int64_t>();
        const auto out = r.get<std::int64_t>();
        const auto k = r.get<std::int64_t>();
        const auto stride = r.get<std::int32_t>();
        const auto pad = r.get<std::int32_t>();
        auto conv = std::make_unique<ConvLayer>(in, out, k, stride, pad);
        conv->kernels() = r.get_tensor();
        conv->bias() = r.get_tensor();
        if (conv->kernels().numel() != in * out * k * k ||
            conv->bias().numel() != out)
          throw FormatError(path + ": conv layer tensor shape mismatch");
        st.net.layers.push_back(std::move(conv));
        break;
      }
      case LayerKind::kBatchNorm: {
        const auto channels = r.get<std::int64_t>();
        const auto eps = r.get<float>();
        const auto momentum = r.get<float>();
        auto bn = std::make_unique<BatchNormLayer>(channels, eps, momentum);
        bn->gamma() = r.get_tensor();
        bn->beta() = r.get_tensor();
        bn->running_mean() = r.get_tensor();
        bn->running_var() = r.get_tensor();
        if (bn->gamma().numel() != channels)
          throw FormatError(path + ": batchnorm tensor shape mismatch");
        st.net.layers.push_back(std::move(bn));
        break;
      }
      case LayerKind::kRelu:
        st.net.layers.push_back(std::make_unique<ReluLayer>());
        break;
      case LayerKind::kMaxPool: {
        const auto window = r.get<std::int32_t>();
        const auto stride = r.get<std::int32_t>();
        st.net.layers.push_back(std::make_unique<MaxPoolLayer>(window, stride));
        break;
      }
      case LayerKind::kFlatten:
        st.net.layers.push_back(std::make_unique<FlattenLayer>());
        break;
      default:
        throw FormatError(path + ": unknown layer kind " +
                          std::to_string(int(kind)) + " at byte " +
                          std::to_string(r.at()));
    }
  }

  const auto vel_count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < vel_count; ++i)
    st.opt.velocity.push_back(r.get_tensor());
  r.finish();

  const auto slots = st.net.params();
  if (slots.size() != st.opt.velocity.size())
    throw FormatError(path + ": " + std::to_string(st.opt.velocity.size()) +
                      " velocity tensors for " + std::to_string(slots.size()) +
                      " parameters");
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (!slots[i].value->same_shape(st.opt.velocity[i]))
      throw FormatError(path + ": velocity " + std::to_string(i) +
                        " shape mismatch");
  return st;
}

}  // namespace binnet

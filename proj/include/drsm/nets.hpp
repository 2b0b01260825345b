// Copyright 2026 The DRSM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DRSM_NETS_HPP
#define DRSM_NETS_HPP

#include "drsm/dataset.hpp"
#include "drsm/ops.hpp"
#include "drsm/parameters.hpp"
#include "drsm/rng.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace drsm {

enum class Variant { kNormal, kGmm, kVae, kVaeAdv, kVaeMixed };

const char* variant_tag(Variant v);     // normal, gmm, vae, vae_adv, vae_mixed
const char* variant_cli_name(Variant v);  // normal, gmm, vae, vae-adv, vae-mixed
Variant variant_from_string(const std::string& name);  // accepts either spelling
inline bool is_vae(Variant v) { return v == Variant::kVae || v == Variant::kVaeAdv || v == Variant::kVaeMixed; }
inline bool uses_discriminator(Variant v) { return v == Variant::kVaeAdv || v == Variant::kVaeMixed; }

// Every size the networks need. The grid extents must be divisible by 8
// (three stride-2 stages).
struct ArchConfig {
  int n_range = 64;
  int n_azimuth = 64;
  int object_capacity = kObjectCapacity;
  int object_features = kObjectFeatures;
  int kernel = 4;
  std::array<int, 3> conv_channels{8, 16, 32};  // raster head, recognition and discriminator stacks
  int object_channels = 16;                     // both 1x1 layers of the object head
  int encoder_hidden = 256;
  int d_x = 128;
  int d_z = 16;
  int decoder_hidden = 256;
  std::array<int, 3> deconv_channels{32, 16, 8};  // reshape depth, then the two hidden deconvs
  int gmm_components = 3;
  double gmm_logvar_offset = 0.01;
  // Fixed scaling of (x, y, heading, speed) before the object head.
  std::array<double, 4> object_feature_scale{1.0 / 75.0, 1.0 / 75.0, 1.0 / 3.141592653589793, 1.0 / 10.0};

  void validate() const;
  // Grid extents come from the dataset and are not settable here.
  void set(const std::string& key, const std::string& value);  // ConfigError on unknown key
  nlohmann::json to_json() const;
  static ArchConfig from_json(const nlohmann::json& j);
  int base_h() const { return n_range / 8; }
  int base_w() const { return n_azimuth / 8; }
  int flat_conv() const { return base_h() * base_w() * conv_channels[2]; }
};

// Network inputs for a batch of frames.
template <typename Scalar>
struct SceneBatch {
  Tensor<Scalar> raster;   // [N, n_range, n_azimuth, 1]
  Tensor<Scalar> objects;  // [N, capacity, 1, features], scaled
  Tensor<Scalar> target;   // [N, n_range, n_azimuth, 1], normalized power
};

template <typename Scalar>
SceneBatch<Scalar> make_batch(const ArchConfig& arch, std::span<const FrameRecord* const> frames) {
  const Index n = static_cast<Index>(frames.size());
  const Index cells = static_cast<Index>(arch.n_range) * arch.n_azimuth;
  const Index obj = static_cast<Index>(arch.object_capacity) * arch.object_features;
  SceneBatch<Scalar> b{Tensor<Scalar>({n, arch.n_range, arch.n_azimuth, 1}),
                       Tensor<Scalar>({n, arch.object_capacity, 1, arch.object_features}),
                       Tensor<Scalar>({n, arch.n_range, arch.n_azimuth, 1})};
  for (Index k = 0; k < n; ++k) {
    const FrameRecord& f = *frames[static_cast<std::size_t>(k)];
    if (f.raster.layers.size() != cells || f.frame.power.size() != cells || f.objects.features.size() != obj) {
      throw ShapeError("make_batch: frame " + std::to_string(k) + " does not match the architecture grid");
    }
    b.raster.value().segment(k * cells, cells) = f.raster.layers.cast<Scalar>();
    b.target.value().segment(k * cells, cells) = normalize_frame(f.frame).cast<Scalar>();
    for (Index row = 0; row < arch.object_capacity; ++row) {
      for (Index c = 0; c < arch.object_features; ++c) {
        double v = f.objects.features(row * arch.object_features + c);
        if (c < 4) v *= arch.object_feature_scale[static_cast<std::size_t>(c)];
        b.objects.value()(k * obj + row * arch.object_features + c) = static_cast<Scalar>(v);
      }
    }
  }
  return b;
}

template <typename Scalar>
struct ConvLayer {
  Tensor<Scalar> kernels;
  Tensor<Scalar> bias;
  Index stride = 1;
  Index pad = 0;
  bool transposed = false;

  Tensor<Scalar> operator()(Tape<Scalar>& tape, const Tensor<Scalar>& x) const {
    return transposed ? conv_transpose2d(tape, x, kernels, bias, stride, pad)
                      : conv2d(tape, x, kernels, bias, stride, pad);
  }
};

template <typename Scalar>
struct DenseLayer {
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;

  Tensor<Scalar> operator()(Tape<Scalar>& tape, const Tensor<Scalar>& x) const {
    return dense(tape, x, weights, bias);
  }
};

namespace detail {

template <typename Scalar>
ConvLayer<Scalar> add_conv(ParameterSet<Scalar>& ps, Rng& rng, const std::string& name, int k, int cin,
                           int cout, int stride, int pad) {
  ConvLayer<Scalar> l;
  l.kernels = ps.add_he(name + ".kernels", {k, k, cin, cout}, static_cast<Index>(k) * k * cin, rng);
  l.bias = ps.add(name + ".bias", {cout});
  l.stride = stride;
  l.pad = pad;
  return l;
}

// Transposed layer mapping cin -> cout channels; kernels stored k x k x cout x cin.
template <typename Scalar>
ConvLayer<Scalar> add_deconv(ParameterSet<Scalar>& ps, Rng& rng, const std::string& name, int k, int cin,
                             int cout, int stride, int pad) {
  ConvLayer<Scalar> l;
  // Each output pixel of a stride-s transposed conv sees about (k/s)^2 * cin inputs.
  const Index fan_in = std::max<Index>(1, static_cast<Index>(k / stride) * (k / stride) * cin);
  l.kernels = ps.add_he(name + ".kernels", {k, k, cout, cin}, fan_in, rng);
  l.bias = ps.add(name + ".bias", {cout});
  l.stride = stride;
  l.pad = pad;
  l.transposed = true;
  return l;
}

template <typename Scalar>
DenseLayer<Scalar> add_dense(ParameterSet<Scalar>& ps, Rng& rng, const std::string& name, int in, int out) {
  return {ps.add_he(name + ".weights", {out, in}, in, rng), ps.add(name + ".bias", {out})};
}

template <typename Scalar>
Tensor<Scalar> flatten(Tape<Scalar>& tape, const Tensor<Scalar>& x) {
  return reshape(tape, x, {x.dim(0), x.size() / x.dim(0)});
}

}  // namespace detail

// Three stride-2 k x k convolutions with ReLU: HxWx1 -> H/8 x W/8 x c2.
template <typename Scalar>
struct ConvStack {
  std::array<ConvLayer<Scalar>, 3> layers;

  static ConvStack build(ParameterSet<Scalar>& ps, Rng& rng, const std::string& name, const ArchConfig& a) {
    ConvStack s;
    int cin = 1;
    for (int i = 0; i < 3; ++i) {
      s.layers[i] = detail::add_conv(ps, rng, name + ".conv" + std::to_string(i), a.kernel, cin,
                                     a.conv_channels[i], 2, (a.kernel - 2) / 2);
      cin = a.conv_channels[i];
    }
    return s;
  }

  Tensor<Scalar> operator()(Tape<Scalar>& tape, const Tensor<Scalar>& image) const {
    Tensor<Scalar> h = image;
    for (const auto& l : layers) h = relu(tape, l(tape, h));
    return detail::flatten(tape, h);
  }
};

// Raster head + object head, flattened, concatenated, two dense+ReLU -> x.
template <typename Scalar>
struct SceneEncoder {
  ConvStack<Scalar> raster_head;
  std::array<ConvLayer<Scalar>, 2> object_head;
  std::array<DenseLayer<Scalar>, 2> joint;

  static SceneEncoder build(ParameterSet<Scalar>& ps, Rng& rng, const ArchConfig& a) {
    SceneEncoder e;
    e.raster_head = ConvStack<Scalar>::build(ps, rng, "encoder.raster", a);
    e.object_head[0] = detail::add_conv(ps, rng, "encoder.objects.conv0", 1, a.object_features, a.object_channels, 1, 0);
    e.object_head[1] = detail::add_conv(ps, rng, "encoder.objects.conv1", 1, a.object_channels, a.object_channels, 1, 0);
    const int flat = a.flat_conv() + a.object_capacity * a.object_channels;
    e.joint[0] = detail::add_dense(ps, rng, "encoder.dense0", flat, a.encoder_hidden);
    e.joint[1] = detail::add_dense(ps, rng, "encoder.dense1", a.encoder_hidden, a.d_x);
    return e;
  }

  // Per-object features after the two 1x1 layers, [N, capacity, 1, channels].
  Tensor<Scalar> object_features(Tape<Scalar>& tape, const Tensor<Scalar>& objects) const {
    Tensor<Scalar> h = relu(tape, object_head[0](tape, objects));
    return relu(tape, object_head[1](tape, h));
  }

  Tensor<Scalar> operator()(Tape<Scalar>& tape, const Tensor<Scalar>& raster, const Tensor<Scalar>& objects) const {
    Tensor<Scalar> r = raster_head(tape, raster);
    Tensor<Scalar> o = detail::flatten(tape, object_features(tape, objects));
    Tensor<Scalar> h = relu(tape, joint[0](tape, concat(tape, r, o)));
    return relu(tape, joint[1](tape, h));
  }
};

// Dense+ReLU twice, reshape to base grid, then three stride-2 transposed
// convolutions up to the full grid with `out_channels` linear outputs.
template <typename Scalar>
struct GridDecoder {
  std::array<DenseLayer<Scalar>, 2> dense_layers;
  std::array<ConvLayer<Scalar>, 3> deconvs;
  Index base_h = 0, base_w = 0, base_c = 0;

  static GridDecoder build(ParameterSet<Scalar>& ps, Rng& rng, const std::string& name, const ArchConfig& a,
                           int in_features, int out_channels) {
    GridDecoder d;
    d.base_h = a.base_h();
    d.base_w = a.base_w();
    d.base_c = a.deconv_channels[0];
    d.dense_layers[0] = detail::add_dense(ps, rng, name + ".dense0", in_features, a.decoder_hidden);
    d.dense_layers[1] = detail::add_dense(ps, rng, name + ".dense1", a.decoder_hidden,
                                          static_cast<int>(d.base_h * d.base_w * d.base_c));
    const int pad = (a.kernel - 2) / 2;
    d.deconvs[0] = detail::add_deconv(ps, rng, name + ".deconv0", a.kernel, a.deconv_channels[0], a.deconv_channels[1], 2, pad);
    d.deconvs[1] = detail::add_deconv(ps, rng, name + ".deconv1", a.kernel, a.deconv_channels[1], a.deconv_channels[2], 2, pad);
    d.deconvs[2] = detail::add_deconv(ps, rng, name + ".deconv2", a.kernel, a.deconv_channels[2], out_channels, 2, pad);
    return d;
  }

  Tensor<Scalar> operator()(Tape<Scalar>& tape, const Tensor<Scalar>& features) const {
    Tensor<Scalar> h = relu(tape, dense_layers[0](tape, features));
    h = relu(tape, dense_layers[1](tape, h));
    h = reshape(tape, h, {features.dim(0), base_h, base_w, base_c});
    h = relu(tape, deconvs[0](tape, h));
    h = relu(tape, deconvs[1](tape, h));
    return deconvs[2](tape, h);
  }
};

template <typename Scalar>
struct NormalGridParams {
  Tensor<Scalar> mean;    // [N, H, W, 1]
  Tensor<Scalar> logvar;  // [N, H, W, 1]
};

template <typename Scalar>
struct GmmGridParams {
  Tensor<Scalar> weights;  // [N, H, W, n], rows sum to 1
  Tensor<Scalar> means;
  Tensor<Scalar> logvars;  // >= offset
};

template <typename Scalar>
struct LatentGaussian {
  Tensor<Scalar> mean;    // [N, d_z]
  Tensor<Scalar> logvar;  // [N, d_z]
};

template <typename Scalar>
NormalGridParams<Scalar> split_normal(Tape<Scalar>& tape, const Tensor<Scalar>& raw) {
  return {slice_last(tape, raw, 0, 1), slice_last(tape, raw, 1, 1)};
}

// 3n raw layers -> weights (squared, normalized), means, log variances
// (ReLU plus offset).
template <typename Scalar>
GmmGridParams<Scalar> split_gmm(Tape<Scalar>& tape, const Tensor<Scalar>& raw, int n, Scalar offset) {
  return {square_normalize(tape, slice_last(tape, raw, 0, n)), slice_last(tape, raw, n, n),
          add_scalar(tape, relu(tape, slice_last(tape, raw, 2 * n, n)), offset)};
}

// z = mean + exp(logvar / 2) * noise, differentiable in (mean, logvar).
template <typename Scalar>
Tensor<Scalar> reparameterize(Tape<Scalar>& tape, const LatentGaussian<Scalar>& q, const Tensor<Scalar>& noise) {
  Tensor<Scalar> sigma = exp(tape, scale(tape, q.logvar, Scalar(0.5)));
  return add(tape, q.mean, mul(tape, sigma, noise));
}

// All five model variants share this container; only the parts a variant
// needs are built.
template <typename Scalar>
class RadarModel {
 public:
  RadarModel(Variant variant, ArchConfig arch, std::uint64_t init_seed)
      : variant_(variant), arch_(std::move(arch)) {
    arch_.validate();
    Rng rng = Rng::substream(init_seed, 0xA11CEu);
    encoder_ = SceneEncoder<Scalar>::build(generator_, rng, arch_);
    switch (variant_) {
      case Variant::kNormal:
        head_ = GridDecoder<Scalar>::build(generator_, rng, "normal", arch_, arch_.d_x, 2);
        break;
      case Variant::kGmm:
        head_ = GridDecoder<Scalar>::build(generator_, rng, "gmm", arch_, arch_.d_x, 3 * arch_.gmm_components);
        break;
      default:
        recognition_ = ConvStack<Scalar>::build(generator_, rng, "recognition", arch_);
        recognition_dense_[0] =
            detail::add_dense(generator_, rng, "recognition.dense0", arch_.flat_conv() + arch_.d_x, arch_.encoder_hidden);
        recognition_dense_[1] = detail::add_dense(generator_, rng, "recognition.dense1", arch_.encoder_hidden, 2 * arch_.d_z);
        head_ = GridDecoder<Scalar>::build(generator_, rng, "decoder", arch_, arch_.d_x + arch_.d_z, 1);
        if (!uses_discriminator(variant_)) break;
        Rng disc_rng = Rng::substream(init_seed, 0xD15Cu);
        critic_ = ConvStack<Scalar>::build(discriminator_, disc_rng, "discriminator", arch_);
        critic_dense_ = detail::add_dense(discriminator_, disc_rng, "discriminator.dense", arch_.flat_conv(), 1);
        break;
    }
  }

  Variant variant() const { return variant_; }
  const ArchConfig& arch() const { return arch_; }
  ParameterSet<Scalar>& generator() { return generator_; }
  const ParameterSet<Scalar>& generator() const { return generator_; }
  ParameterSet<Scalar>& discriminator() { return discriminator_; }
  const ParameterSet<Scalar>& discriminator() const { return discriminator_; }
  const SceneEncoder<Scalar>& encoder() const { return encoder_; }

  Tensor<Scalar> encode(Tape<Scalar>& tape, const SceneBatch<Scalar>& batch) const {
    return encoder_(tape, batch.raster, batch.objects);
  }

  NormalGridParams<Scalar> normal_forward(Tape<Scalar>& tape, const Tensor<Scalar>& x) const {
    expect(Variant::kNormal, "normal_forward");
    return split_normal(tape, head_(tape, x));
  }

  GmmGridParams<Scalar> gmm_forward(Tape<Scalar>& tape, const Tensor<Scalar>& x) const {
    expect(Variant::kGmm, "gmm_forward");
    return split_gmm(tape, head_(tape, x), arch_.gmm_components, static_cast<Scalar>(arch_.gmm_logvar_offset));
  }

  // Q(z | x, Y) with Y normalized, [N, H, W, 1].
  LatentGaussian<Scalar> recognize(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Tensor<Scalar>& y) const {
    require_vae("recognize");
    Tensor<Scalar> h = concat(tape, recognition_(tape, y), x);
    h = relu(tape, recognition_dense_[0](tape, h));
    Tensor<Scalar> out = recognition_dense_[1](tape, h);
    return {slice_last(tape, out, 0, arch_.d_z), slice_last(tape, out, arch_.d_z, arch_.d_z)};
  }

  // f(x, z): normalized power prediction in (0, 1), [N, H, W, 1].
  Tensor<Scalar> decode(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Tensor<Scalar>& z) const {
    require_vae("decode");
    if (z.dim(-1) != arch_.d_z) throw ShapeError("decode: latent has " + std::to_string(z.dim(-1)) + " entries, expected " + std::to_string(arch_.d_z));
    return sigmoid(tape, head_(tape, concat(tape, x, z)));
  }

  // D(Y): probability that a normalized grid is real, [N, 1].
  Tensor<Scalar> discriminate(Tape<Scalar>& tape, const Tensor<Scalar>& y) const {
    if (!uses_discriminator(variant_)) throw std::logic_error(std::string("discriminate called on a ") + variant_tag(variant_) + " model");
    return sigmoid(tape, critic_dense_(tape, critic_(tape, y)));
  }

  // One stochastic draw per frame in normalized units, [N, H, W, 1].
  Tensor<Scalar> sample(const SceneBatch<Scalar>& batch, std::span<Rng> rngs) const {
    Tape<Scalar> tape(false);
    const Index n = batch.raster.dim(0);
    if (static_cast<Index>(rngs.size()) != n) throw ShapeError("sample: need one rng per frame");
    Tensor<Scalar> x = encode(tape, batch);
    const Index cells = static_cast<Index>(arch_.n_range) * arch_.n_azimuth;
    Tensor<Scalar> out({n, arch_.n_range, arch_.n_azimuth, 1});
    if (variant_ == Variant::kNormal) {
      const auto p = normal_forward(tape, x);
      for (Index k = 0; k < n; ++k) {
        Rng& rng = rngs[static_cast<std::size_t>(k)];
        for (Index c = 0; c < cells; ++c) {
          const Index at = k * cells + c;
          const double sd = std::exp(0.5 * static_cast<double>(p.logvar.value()(at)));
          out.value()(at) = static_cast<Scalar>(static_cast<double>(p.mean.value()(at)) + sd * rng.normal());
        }
      }
    } else if (variant_ == Variant::kGmm) {
      const auto p = gmm_forward(tape, x);
      const Index m = arch_.gmm_components;
      for (Index k = 0; k < n; ++k) {
        Rng& rng = rngs[static_cast<std::size_t>(k)];
        for (Index c = 0; c < cells; ++c) {
          const Index base = (k * cells + c) * m;
          double u = rng.uniform();
          Index pick = m - 1;
          for (Index i = 0; i < m; ++i) {
            const double w = static_cast<double>(p.weights.value()(base + i));
            if (u < w) {
              pick = i;
              break;
            }
            u -= w;
          }
          const double sd = std::exp(0.5 * static_cast<double>(p.logvars.value()(base + pick)));
          out.value()(k * cells + c) =
              static_cast<Scalar>(static_cast<double>(p.means.value()(base + pick)) + sd * rng.normal());
        }
      }
    } else {
      Tensor<Scalar> z({n, arch_.d_z});
      for (Index k = 0; k < n; ++k) {
        for (Index j = 0; j < arch_.d_z; ++j) z.value()(k * arch_.d_z + j) = static_cast<Scalar>(rngs[static_cast<std::size_t>(k)].normal());
      }
      out.value() = decode(tape, x, z).value();
    }
    out.value() = out.value().max(Scalar(0)).min(Scalar(1));
    return out;
  }

 private:
  void expect(Variant v, const char* what) const {
    if (variant_ != v) throw std::logic_error(std::string(what) + " called on a " + variant_tag(variant_) + " model");
  }
  void require_vae(const char* what) const {
    if (!is_vae(variant_)) throw std::logic_error(std::string(what) + " called on a " + variant_tag(variant_) + " model");
  }

  Variant variant_;
  ArchConfig arch_;
  ParameterSet<Scalar> generator_;
  ParameterSet<Scalar> discriminator_;
  SceneEncoder<Scalar> encoder_;
  GridDecoder<Scalar> head_;
  ConvStack<Scalar> recognition_;
  std::array<DenseLayer<Scalar>, 2> recognition_dense_;
  ConvStack<Scalar> critic_;
  DenseLayer<Scalar> critic_dense_;
};

// Persisted model: variant, architecture and training metadata in the
// header, generator then discriminator tensors as records.
struct ModelCheckpoint {
  Variant variant = Variant::kNormal;
  ArchConfig arch;
  nlohmann::json training = nlohmann::json::object();
};

std::uint64_t architecture_hash(Variant variant, const ArchConfig& arch);

void save_model(const std::string& path, const RadarModel<float>& model, const nlohmann::json& training);
RadarModel<float> load_model(const std::string& path, ModelCheckpoint* info = nullptr);

}  // namespace drsm

#endif  // DRSM_NETS_HPP

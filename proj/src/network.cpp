#include "ego/network.hpp"

#include <cmath>

namespace ego {

namespace {

template <typename S>
Tensor<S> xavier_for(const std::string& name, std::vector<int> shape, std::uint64_t seed) {
  return xavier_init<S>(std::move(shape), Rng::stream(seed, name).next_u64());
}

template <typename S>
void create_dense(ParamStore<S>& store, const std::string& name, int out, int in,
                  std::uint64_t seed) {
  store.create(name + ".w", xavier_for<S>(name, {out, in}, seed));
  store.create(name + ".b", Tensor<S>({out}));
}

template <typename S>
void create_conv(ParamStore<S>& store, const std::string& name, int cout, int cin, int k,
                 std::uint64_t seed) {
  store.create(name + ".w", xavier_for<S>(name, {cout, cin, k, k}, seed));
  store.create(name + ".b", Tensor<S>({cout}));
}

template <typename S>
void create_deconv(ParamStore<S>& store, const std::string& name, int cin, int cout, int k,
                   std::uint64_t seed) {
  store.create(name + ".w", xavier_for<S>(name, {cin, cout, k, k}, seed));
  store.create(name + ".b", Tensor<S>({cout}));
}

template <typename S>
void create_bn(ParamStore<S>& store, const std::string& name, int channels) {
  store.create(name + ".g", Tensor<S>::full({channels}, S(1)));
  store.create(name + ".b", Tensor<S>({channels}));
  store.bn_state(name, channels);
}

template <typename S>
struct ParamUser {
  ParamStore<S>* store;
  Tape<S>* tape;
  bool trainable;
  Var<S> operator()(const std::string& name) {
    return trainable ? store->use(*tape, name) : store->use_frozen(*tape, name);
  }
};

template <typename S>
Var<S> bn_block(ParamUser<S>& p, const std::string& name, Var<S> x, bool train, double leaky) {
  Var<S> y = batchnorm(x, p(name + ".g"), p(name + ".b"),
                       &p.store->bn_state(name, p.store->value(name + ".g").dim(0)), train);
  return leaky_relu(y, static_cast<S>(leaky));
}

int conv_out(int in, int k, int s, int pad) { return (in + 2 * pad - k) / s + 1; }

}  // namespace

BranchConfig BranchConfig::from_mode(const std::string& mode) {
  BranchConfig b;
  if (mode == "p3d") { b.rot = false; b.hm = false; }
  else if (mode == "p3d+rot") { b.rot = true; b.hm = false; }
  else if (mode == "p3d+hm") { b.rot = false; b.hm = true; }
  else if (mode == "p3d+hm+rot" || mode == "p3d+rot+hm") { b.rot = true; b.hm = true; }
  else throw ConfigError("unknown branch mode: " + mode);
  return b;
}

BranchConfig branch_config_from_mode(const std::string& mode) {
  return BranchConfig::from_mode(mode);
}

LifterConfig::HmChain LifterConfig::hm_chain(int size) {
  switch (size) {
    case 8: return {2, 2};
    case 16: return {4, 2};
    case 24: return {3, 3};
    case 36: return {9, 2};
    case 48: return {6, 3};
    default: throw ConfigError("unsupported hm reconstruction size " + std::to_string(size));
  }
}

// ---------------------------------------------------------------------------
// Detector
// ---------------------------------------------------------------------------

template <typename S>
void init_detector(ParamStore<S>& store, const DetectorConfig& cfg, std::uint64_t seed) {
  if (cfg.channels.size() != 6) throw ConfigError("detector expects 6 encoder blocks");
  int cin = 3;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    const int k = i + 1 < cfg.channels.size() ? 4 : 3;
    const std::string name = "det.conv" + std::to_string(i);
    create_conv(store, name, cfg.channels[i], cin, k, seed);
    create_bn(store, "det.bn" + std::to_string(i), cfg.channels[i]);
    cin = cfg.channels[i];
  }
  create_deconv(store, "det.deconv0", cin, cfg.head_channels, 3, seed);
  create_bn(store, "det.dbn0", cfg.head_channels);
  create_deconv(store, "det.deconv1", cfg.head_channels, kNumHeatmapJoints, 3, seed);
}

template <typename S>
Var<S> detector_forward(Tape<S>& tape, ParamStore<S>& store, const DetectorConfig& cfg,
                        Var<S> image, bool train, bool trainable) {
  const auto& shape = image.value().shape();
  if (shape.size() != 4 || shape[1] != 3 || shape[2] != cfg.image_size ||
      shape[3] != cfg.image_size)
    throw DimensionError("detector_forward: expected (B,3," + std::to_string(cfg.image_size) +
                         "," + std::to_string(cfg.image_size) + ") input");
  ParamUser<S> p{&store, &tape, trainable};
  Var<S> x = image;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    const bool last = i + 1 == cfg.channels.size();
    const std::string name = "det.conv" + std::to_string(i);
    x = conv2d(x, p(name + ".w"), p(name + ".b"), last ? 1 : 2, 1);
    x = bn_block(p, "det.bn" + std::to_string(i), x, train, cfg.leaky);
  }
  x = deconv2d(x, p("det.deconv0.w"), p("det.deconv0.b"), 2, 0);
  x = bn_block(p, "det.dbn0", x, train, cfg.leaky);
  x = deconv2d(x, p("det.deconv1.w"), p("det.deconv1.b"), 2, 0);
  return x;  // (B, 15, 47, 47)
}

// ---------------------------------------------------------------------------
// Lifting autoencoder
// ---------------------------------------------------------------------------

namespace {

// encoder spatial sizes after the stride-2 kernel-4 pad-1 chain
int encoder_final_dim(const LifterConfig& cfg) {
  int d = cfg.hm_in;
  for (std::size_t i = 0; i < cfg.encoder_channels.size(); ++i) d = conv_out(d, 4, 2, 1);
  if (d < 1) throw ConfigError("lifter encoder collapses below 1x1");
  return d;
}

std::vector<int> hm_deconv_channels(const LifterConfig& cfg) {
  const auto chain = LifterConfig::hm_chain(cfg.hm_size);
  std::vector<int> ch(static_cast<std::size_t>(chain.steps));
  int c = cfg.hm_deconv_last;
  for (int i = chain.steps - 1; i >= 0; --i) {
    ch[static_cast<std::size_t>(i)] = c;
    c *= 2;
  }
  return ch;  // e.g. {128, 64, 32} for three steps with last = 32
}

}  // namespace

template <typename S>
void init_lifter(ParamStore<S>& store, const LifterConfig& cfg, const BranchConfig& branches,
                 std::uint64_t seed) {
  int cin = kNumHeatmapJoints;
  for (std::size_t i = 0; i < cfg.encoder_channels.size(); ++i) {
    create_conv(store, "lift.enc" + std::to_string(i), cfg.encoder_channels[i], cin, 4, seed);
    create_bn(store, "lift.bn" + std::to_string(i), cfg.encoder_channels[i]);
    cin = cfg.encoder_channels[i];
  }
  const int d = encoder_final_dim(cfg);
  create_dense(store, "lift.z", cfg.z_size, cin * d * d, seed);

  int w = cfg.z_size;
  for (std::size_t i = 0; i < cfg.pose_widths.size(); ++i) {
    create_dense(store, "lift.pose" + std::to_string(i), cfg.pose_widths[i], w, seed);
    w = cfg.pose_widths[i];
  }
  create_dense(store, "lift.pose_out", kNumJoints * 3, w, seed);

  if (branches.rot) {
    w = cfg.z_size;
    for (std::size_t i = 0; i < cfg.rot_widths.size(); ++i) {
      create_dense(store, "lift.rot" + std::to_string(i), cfg.rot_widths[i], w, seed);
      w = cfg.rot_widths[i];
    }
    create_dense(store, "lift.rot_out", kNumJoints * 4, w, seed);
  }

  if (branches.hm) {
    const auto chain = LifterConfig::hm_chain(cfg.hm_size);
    const auto ch = hm_deconv_channels(cfg);
    create_dense(store, "lift.hm_fc0", cfg.hm_dense_width, cfg.z_size, seed);
    create_dense(store, "lift.hm_fc1", ch[0] * chain.start * chain.start, cfg.hm_dense_width,
                 seed);
    int c = ch[0];
    for (int i = 0; i < chain.steps; ++i) {
      const bool last = i + 1 == chain.steps;
      const int cout = last ? kNumHeatmapJoints : ch[static_cast<std::size_t>(i + 1)];
      create_deconv(store, "lift.hm_dc" + std::to_string(i), c, cout, 4, seed);
      if (!last) create_bn(store, "lift.hm_bn" + std::to_string(i), cout);
      c = cout;
    }
  }
}

template <typename S>
LifterOutputs<S> lifter_forward(Tape<S>& tape, ParamStore<S>& store, const LifterConfig& cfg,
                                const BranchConfig& branches, Var<S> heatmaps, bool train,
                                bool trainable) {
  const auto& shape = heatmaps.value().shape();
  if (shape.size() != 4 || shape[1] != kNumHeatmapJoints || shape[2] != cfg.hm_in ||
      shape[3] != cfg.hm_in)
    throw DimensionError("lifter_forward: expected (B,15," + std::to_string(cfg.hm_in) + "," +
                         std::to_string(cfg.hm_in) + ") heatmaps");
  const int B = shape[0];
  ParamUser<S> p{&store, &tape, trainable};

  Var<S> x = heatmaps;
  for (std::size_t i = 0; i < cfg.encoder_channels.size(); ++i) {
    x = conv2d(x, p("lift.enc" + std::to_string(i) + ".w"),
               p("lift.enc" + std::to_string(i) + ".b"), 2, 1);
    x = bn_block(p, "lift.bn" + std::to_string(i), x, train, cfg.leaky);
  }
  const int d = encoder_final_dim(cfg);
  const int flat = cfg.encoder_channels.back() * d * d;
  x = reshape(x, {B, flat});

  LifterOutputs<S> out;
  out.z = dense(x, p("lift.z.w"), p("lift.z.b"));

  Var<S> h = out.z;
  for (std::size_t i = 0; i < cfg.pose_widths.size(); ++i)
    h = leaky_relu(dense(h, p("lift.pose" + std::to_string(i) + ".w"),
                         p("lift.pose" + std::to_string(i) + ".b")),
                   static_cast<S>(cfg.leaky));
  out.pose = dense(h, p("lift.pose_out.w"), p("lift.pose_out.b"));

  if (branches.rot) {
    h = out.z;
    for (std::size_t i = 0; i < cfg.rot_widths.size(); ++i)
      h = leaky_relu(dense(h, p("lift.rot" + std::to_string(i) + ".w"),
                           p("lift.rot" + std::to_string(i) + ".b")),
                     static_cast<S>(cfg.leaky));
    Var<S> raw = dense(h, p("lift.rot_out.w"), p("lift.rot_out.b"));
    out.rot = normalize_rows(raw, 4);
    out.has_rot = true;
  }

  if (branches.hm) {
    const auto chain = LifterConfig::hm_chain(cfg.hm_size);
    const auto ch = hm_deconv_channels(cfg);
    h = leaky_relu(dense(out.z, p("lift.hm_fc0.w"), p("lift.hm_fc0.b")),
                   static_cast<S>(cfg.leaky));
    h = leaky_relu(dense(h, p("lift.hm_fc1.w"), p("lift.hm_fc1.b")), static_cast<S>(cfg.leaky));
    h = reshape(h, {B, ch[0], chain.start, chain.start});
    for (int i = 0; i < chain.steps; ++i) {
      const bool last = i + 1 == chain.steps;
      h = deconv2d(h, p("lift.hm_dc" + std::to_string(i) + ".w"),
                   p("lift.hm_dc" + std::to_string(i) + ".b"), 2, 1);
      if (!last) h = bn_block(p, "lift.hm_bn" + std::to_string(i), h, train, cfg.leaky);
    }
    out.hm = h;  // (B, 15, hm_size, hm_size)
    out.has_hm = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Taped rotation extraction r(P)
// ---------------------------------------------------------------------------

template <typename S>
Var<S> taped_extract_rotations(Tape<S>& tape, Var<S> pose48, const Skeleton& skel) {
  if (pose48.value().numel() != kNumJoints * 3)
    throw DimensionError("taped_extract_rotations: expected 48 values");
  const S eps = static_cast<S>(1e-12);
  Tensor<S> ident({4});
  ident[0] = S(1);
  std::array<Var<S>, kNumJoints> local, global;
  for (int j : skel.topo_order) {
    const int parent = skel.parent[static_cast<std::size_t>(j)];
    if (parent < 0) {
      local[static_cast<std::size_t>(j)] = make_constant(tape, ident);
      global[static_cast<std::size_t>(j)] = local[static_cast<std::size_t>(j)];
      continue;
    }
    Var<S> bone = sub(slice(pose48, 3 * j, 3), slice(pose48, 3 * parent, 3));
    Var<S> dir = vsdiv(bone, norm(bone, eps));
    Var<S> dir_parent = quat_rotate(quat_conj_op(global[static_cast<std::size_t>(parent)]), dir);
    const Vec3 rest = skel.rest_offset[static_cast<std::size_t>(j)].normalized();
    Tensor<S> rest_t({3});
    for (int k = 0; k < 3; ++k) rest_t[k] = static_cast<S>(rest[k]);
    Var<S> rest_v = make_constant(tape, std::move(rest_t));
    Var<S> c = dot(rest_v, dir_parent);
    Var<S> axis = cross3(rest_v, dir_parent);
    Var<S> qraw = concat<S>({add_scalar(c, S(1)), axis});
    local[static_cast<std::size_t>(j)] = vsdiv(qraw, norm(qraw, eps));
    global[static_cast<std::size_t>(j)] =
        quat_mul_op(global[static_cast<std::size_t>(parent)], local[static_cast<std::size_t>(j)]);
  }
  std::vector<Var<S>> parts;
  parts.reserve(kNumJoints);
  for (int j = 0; j < kNumJoints; ++j) parts.push_back(local[static_cast<std::size_t>(j)]);
  return concat(parts);
}

// ---------------------------------------------------------------------------
// L_AE
// ---------------------------------------------------------------------------

template <typename S>
Var<S> loss_ae(Tape<S>& tape, const LifterOutputs<S>& out, const BatchTargets<S>& targets,
               const LossWeights& weights, const Skeleton& skel) {
  const int B = out.pose.value().dim(0);
  if (static_cast<int>(targets.has_3d.size()) != B)
    throw DimensionError("loss_ae: has_3d mask size mismatch");
  const S inv_b = S(1) / static_cast<S>(B);

  std::vector<Var<S>> sample_terms;

  // limb endpoints: (joint, parent) pairs in skeleton index order
  std::array<int, kNumBones> limb_joint{}, limb_parent{};
  {
    int idx = 0;
    for (int j = 0; j < kNumJoints; ++j) {
      if (skel.parent[static_cast<std::size_t>(j)] < 0) continue;
      limb_joint[static_cast<std::size_t>(idx)] = j;
      limb_parent[static_cast<std::size_t>(idx)] = skel.parent[static_cast<std::size_t>(j)];
      ++idx;
    }
  }

  for (int s = 0; s < B; ++s) {
    if (!targets.has_3d[static_cast<std::size_t>(s)]) continue;
    Var<S> pose_s = slice(out.pose, s * kNumJoints * 3, kNumJoints * 3);
    Tensor<S> gt_s({kNumJoints * 3});
    gt_s.flat() = targets.pose.flat().segment(static_cast<std::int64_t>(s) * kNumJoints * 3,
                                              kNumJoints * 3);

    // |P - P^|^2
    Var<S> gt_v = make_constant(tape, gt_s);
    Var<S> pose_err = sum(square(sub(pose_s, gt_v)));

    // limb regularizer: cosine similarity and unsquared length error
    std::vector<Var<S>> cos_terms, len_terms;
    for (int l = 0; l < kNumBones; ++l) {
      const int j = limb_joint[static_cast<std::size_t>(l)];
      const int pj = limb_parent[static_cast<std::size_t>(l)];
      Var<S> limb = sub(slice(pose_s, 3 * j, 3), slice(pose_s, 3 * pj, 3));
      Tensor<S> gt_limb({3});
      for (int k = 0; k < 3; ++k) gt_limb[k] = gt_s[3 * j + k] - gt_s[3 * pj + k];
      const S gt_norm = std::sqrt(gt_limb.flat().square().sum());
      Var<S> gt_limb_v = make_constant(tape, gt_limb);
      Var<S> denom = mul_scalar(norm(limb, S(1e-12)), gt_norm);
      cos_terms.push_back(div(dot(limb, gt_limb_v), denom));
      len_terms.push_back(norm(sub(limb, gt_limb_v)));
    }
    Var<S> theta = sum(concat(cos_terms));
    Var<S> len_err = sum(concat(len_terms));
    Var<S> regularizer = add(mul_scalar(theta, static_cast<S>(weights.theta)),
                             mul_scalar(len_err, static_cast<S>(weights.len)));
    Var<S> term = mul_scalar(add(pose_err, regularizer), static_cast<S>(weights.p));

    if (out.has_rot) {
      Var<S> rot_s = slice(out.rot, s * kNumJoints * 4, kNumJoints * 4);
      Var<S> extracted = taped_extract_rotations(tape, pose_s, skel);
      std::vector<Var<S>> rot_terms;
      for (int j = 0; j < kNumJoints; ++j) {
        Var<S> qp = slice(rot_s, 4 * j, 4);
        Var<S> qe = slice(extracted, 4 * j, 4);
        // q and -q denote the same rotation: align the extracted sign
        Var<S> aligned = smul(sign_const(dot(qp, qe)), qe);
        rot_terms.push_back(sum(square(sub(qp, aligned))));
      }
      term = add(term, mul_scalar(sum(concat(rot_terms)), static_cast<S>(weights.r)));
    }
    sample_terms.push_back(term);
  }

  Var<S> total = make_constant(tape, Tensor<S>::scalar(S(0)));
  if (!sample_terms.empty()) total = mul_scalar(sum(concat(sample_terms)), inv_b);

  if (out.has_hm) {
    detail::check_same_shape(out.hm.value(), targets.hm, "loss_ae/hm");
    Var<S> hm_target = make_constant(tape, targets.hm);
    Var<S> hm_term = sum(square(sub(out.hm, hm_target)));
    total = add(total, mul_scalar(hm_term, static_cast<S>(weights.hm) * inv_b));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Explicit instantiations: float for training, double for gradient checks
// ---------------------------------------------------------------------------

template void init_detector<float>(ParamStore<float>&, const DetectorConfig&, std::uint64_t);
template void init_detector<double>(ParamStore<double>&, const DetectorConfig&, std::uint64_t);
template void init_lifter<float>(ParamStore<float>&, const LifterConfig&, const BranchConfig&,
                                 std::uint64_t);
template void init_lifter<double>(ParamStore<double>&, const LifterConfig&, const BranchConfig&,
                                  std::uint64_t);
template Var<float> detector_forward<float>(Tape<float>&, ParamStore<float>&,
                                            const DetectorConfig&, Var<float>, bool, bool);
template Var<double> detector_forward<double>(Tape<double>&, ParamStore<double>&,
                                              const DetectorConfig&, Var<double>, bool, bool);
template LifterOutputs<float> lifter_forward<float>(Tape<float>&, ParamStore<float>&,
                                                    const LifterConfig&, const BranchConfig&,
                                                    Var<float>, bool, bool);
template LifterOutputs<double> lifter_forward<double>(Tape<double>&, ParamStore<double>&,
                                                      const LifterConfig&, const BranchConfig&,
                                                      Var<double>, bool, bool);
template Var<float> taped_extract_rotations<float>(Tape<float>&, Var<float>, const Skeleton&);
template Var<double> taped_extract_rotations<double>(Tape<double>&, Var<double>, const Skeleton&);
template Var<float> loss_ae<float>(Tape<float>&, const LifterOutputs<float>&,
                                   const BatchTargets<float>&, const LossWeights&,
                                   const Skeleton&);
template Var<double> loss_ae<double>(Tape<double>&, const LifterOutputs<double>&,
                                     const BatchTargets<double>&, const LossWeights&,
                                     const Skeleton&);

}  // namespace ego

// A trained model plus everything needed to apply it to new data: the
// architecture, channel/physics normalization, penalty configuration, bearing
// geometry, and envelope band. Serialized as a checkpoint whose meta string
// carries the non-tensor state as JSON.
#pragma once

#include <string>
#include <utility>

#include "bfkit/checkpoint.hpp"
#include "bfkit/common.hpp"
#include "bfkit/config.hpp"
#include "bfkit/model.hpp"
#include "bfkit/train.hpp"

namespace bfkit::bundle {

inline constexpr int kMetaSchema = 1;

struct ModelBundle {
  model::ArchConfig arch;
  geometry::BearingGeometry geom;
  dsp::BandpassSpec band;
  train::Normalization nz;
  model::PhysicsLossConfig physics;
  model::MultimodalNet net;

  ModelBundle(model::ArchConfig a, geometry::BearingGeometry g, dsp::BandpassSpec b,
              train::Normalization n, model::PhysicsLossConfig p, std::uint64_t init_seed)
      : arch(a),
        geom(g),
        band(b),
        nz(std::move(n)),
        physics(p),
        net(std::move(a), init_seed) {}
};

inline std::string bundle_meta_json(const ModelBundle& b) {
  config::json meta;
  meta["schema"] = kMetaSchema;
  meta["arch"] = config::to_json(b.arch);
  meta["geometry"] = config::to_json(b.geom);
  meta["band"] = config::to_json(b.band);
  meta["normalization"] = config::to_json(b.nz);
  meta["loss"] = config::to_json(b.physics);
  return meta.dump();
}

inline void save_bundle(const std::string& path, const ModelBundle& b) {
  nn::save_checkpoint(path, b.net.params(), model::arch_hash(b.arch),
                              bundle_meta_json(b));
}

inline ModelBundle load_bundle(const std::string& path) {
  const auto ck = nn::load_checkpoint(path, std::nullopt);
  const auto meta = config::parse_json_text(ck.meta_json, path + " (checkpoint meta)");
  const int schema = config::get_or<int>(meta, "schema", -1);
  if (schema != kMetaSchema)
    throw ParseError("checkpoint meta: unsupported schema in " + path);

  auto section = [&](const char* key) -> const config::json& {
    const config::json* node = config::find_path(meta, key);
    if (node == nullptr)
      throw ParseError(std::string("checkpoint meta: missing '") + key + "' in " + path);
    return *node;
  };

  const auto arch = config::arch_from_json(section("arch"));
  if (model::arch_hash(arch) != ck.arch_hash)
    throw StateError("checkpoint meta architecture does not match the stored hash: " + path);

  ModelBundle b(arch, config::geometry_from_json(section("geometry"), "geometry"),
                config::band_from_json(section("band")),
                config::normalization_from_json(section("normalization")),
                config::physics_from_json(section("loss")), 0);
  nn::restore_into(b.net.params(), ck);
  return b;
}

}  // namespace bfkit::bundle

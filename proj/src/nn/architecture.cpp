#include "tpsf/nn/architecture.hpp"

#include <sstream>

namespace tpsf::nn {

Architecture default_architecture() {
  return {LayerSpec::conv(32, 5), LayerSpec::relu(),      LayerSpec::conv(32, 5), LayerSpec::relu(),
          LayerSpec::maxpool(5),  LayerSpec::conv(64, 3), LayerSpec::relu(),      LayerSpec::maxpool(3),
          LayerSpec::conv(64, 3), LayerSpec::relu(),      LayerSpec::conv(64, 3), LayerSpec::relu(),
          LayerSpec::maxpool(3),  LayerSpec::dense(2000), LayerSpec::relu(),      LayerSpec::dense(512),
          LayerSpec::relu(),      LayerSpec::dense(25)};
}

std::vector<Shape> infer_shapes(const Architecture& arch, Shape input) {
  if (input.c <= 0 || input.h <= 0 || input.w <= 0) throw ConfigError("network input shape must be positive");
  if (arch.empty()) throw ConfigError("network architecture is empty");
  std::vector<Shape> out;
  Shape s = input;
  bool flat = false;
  for (std::size_t i = 0; i < arch.size(); ++i) {
    const LayerSpec& l = arch[i];
    const std::string where = "layer " + std::to_string(i) + ": ";
    switch (l.kind) {
      case LayerKind::conv:
        if (flat) throw ConfigError(where + "conv after a dense layer");
        if (l.units <= 0 || l.kernel <= 0 || l.kernel % 2 == 0) {
          throw ConfigError(where + "conv needs positive channels and an odd kernel");
        }
        s.c = l.units;
        break;
      case LayerKind::maxpool:
        if (flat) throw ConfigError(where + "maxpool after a dense layer");
        if (l.kernel <= 0) throw ConfigError(where + "maxpool window must be positive");
        s.h /= l.kernel;
        s.w /= l.kernel;
        if (s.h == 0 || s.w == 0) throw ConfigError(where + "maxpool window larger than its input");
        break;
      case LayerKind::dense:
        if (l.units <= 0) throw ConfigError(where + "dense needs positive units");
        s = Shape{l.units, 1, 1};
        flat = true;
        break;
      case LayerKind::relu:
        break;
    }
    out.push_back(s);
  }
  return out;
}

std::uint64_t architecture_hash(const Architecture& arch, Shape input) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](std::int64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= static_cast<std::uint64_t>(v >> (8 * b)) & 0xFFu;
      h *= 0x100000001b3ULL;
    }
  };
  mix(input.c);
  mix(input.h);
  mix(input.w);
  for (const auto& l : arch) {
    mix(static_cast<int>(l.kind));
    mix(l.units);
    mix(l.kernel);
  }
  return h;
}

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv:
      return "conv";
    case LayerKind::relu:
      return "relu";
    case LayerKind::maxpool:
      return "maxpool";
    case LayerKind::dense:
      return "dense";
  }
  return "?";
}

}  // namespace

std::string describe(const Architecture& arch, Shape input) {
  const auto shapes = infer_shapes(arch, input);
  std::ostringstream os;
  os << "input " << input.c << 'x' << input.h << 'x' << input.w << '\n';
  for (std::size_t i = 0; i < arch.size(); ++i) {
    os << kind_name(arch[i].kind);
    if (arch[i].kind == LayerKind::conv) os << ' ' << arch[i].units << " k" << arch[i].kernel;
    if (arch[i].kind == LayerKind::maxpool) os << ' ' << arch[i].kernel;
    if (arch[i].kind == LayerKind::dense) os << ' ' << arch[i].units;
    os << " -> " << shapes[i].c << 'x' << shapes[i].h << 'x' << shapes[i].w << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const Architecture& arch) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& l : arch) {
    nlohmann::json e;
    e["kind"] = kind_name(l.kind);
    if (l.kind == LayerKind::conv) {
      e["channels"] = l.units;
      e["kernel"] = l.kernel;
    } else if (l.kind == LayerKind::maxpool) {
      e["window"] = l.kernel;
    } else if (l.kind == LayerKind::dense) {
      e["units"] = l.units;
    }
    j.push_back(e);
  }
  return j;
}

Architecture architecture_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("architecture must be a JSON array of layers");
  Architecture arch;
  try {
    for (const auto& e : j) {
      const auto kind = e.at("kind").get<std::string>();
      if (kind == "conv") {
        arch.push_back(LayerSpec::conv(e.at("channels").get<int>(), e.at("kernel").get<int>()));
      } else if (kind == "relu") {
        arch.push_back(LayerSpec::relu());
      } else if (kind == "maxpool") {
        arch.push_back(LayerSpec::maxpool(e.at("window").get<int>()));
      } else if (kind == "dense") {
        arch.push_back(LayerSpec::dense(e.at("units").get<int>()));
      } else {
        throw ConfigError("unknown layer kind '" + kind + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("architecture: ") + e.what());
  }
  return arch;
}

}  // namespace tpsf::nn

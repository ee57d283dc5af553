#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "c3dr/geometry.hpp"
#include "c3dr/scene.hpp"
#include "json.hpp"

namespace c3dr {

namespace fs = std::filesystem;

struct InstanceObservation {
  int track = 0;
  std::string category;
  Mask mask;
};

struct Frame {
  int id = 0;
  CameraModel camera;
  DepthMap depth;
  std::vector<InstanceObservation> instances;
  std::optional<std::string> image;  // RGB reference, not interpreted
};

struct SceneBundle {
  std::vector<Frame> frames;
  Vec3 gravity = Vec3(0, 0, -1);
  std::vector<std::string> warnings;  // non-fatal load diagnostics

  const Frame* find_frame(int id) const {
    for (const auto& f : frames)
      if (f.id == id) return &f;
    return nullptr;
  }

  std::optional<std::size_t> frame_index(int id) const {
    for (std::size_t i = 0; i < frames.size(); ++i)
      if (frames[i].id == id) return i;
    return std::nullopt;
  }
};

// %.9g: fixed formatting for everything the library serializes as text.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Rasters

inline std::vector<char> read_file_bytes(const fs::path& path, const std::string& field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string(), field, "cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const fs::path& path, const std::string& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WriteError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WriteError("write failed: " + path.string());
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

}  // namespace detail

// Depth raster: u32 width, u32 height, then width*height float32, all little-endian.
inline std::string encode_depth(const DepthMap& depth) {
  std::string out;
  out.reserve(8 + depth.values.size() * 4);
  detail::put_u32(out, static_cast<std::uint32_t>(depth.width));
  detail::put_u32(out, static_cast<std::uint32_t>(depth.height));
  for (float f : depth.values) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, 4);
    detail::put_u32(out, bits);
  }
  return out;
}

inline DepthMap decode_depth(const std::vector<char>& bytes, const std::string& file) {
  if (bytes.size() < 8) throw LoadError(file, "header", "depth raster shorter than 8 bytes");
  const std::uint32_t w = detail::get_u32(bytes.data());
  const std::uint32_t h = detail::get_u32(bytes.data() + 4);
  if (w == 0 || h == 0 || w > 65536 || h > 65536)
    throw LoadError(file, "header", "implausible raster size");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() != 8 + 4 * n)
    throw LoadError(file, "data", "expected " + std::to_string(8 + 4 * n) + " bytes, got " +
                                      std::to_string(bytes.size()));
  DepthMap d(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = detail::get_u32(bytes.data() + 8 + 4 * i);
    float f;
    std::memcpy(&f, &bits, 4);
    if (!(f == 0.0f || (std::isfinite(f) && f > 0.0f)))
      throw LoadError(file, "data", "depth at index " + std::to_string(i) +
                                        " is neither 0 (invalid) nor positive finite");
    d.values[i] = f;
  }
  return d;
}

// 8-bit binary PGM, 0 = out, 255 = in.
inline std::string encode_mask(const Mask& mask) {
  std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) +
                    "\n255\n";
  out.reserve(out.size() + mask.bits.size());
  for (auto b : mask.bits) out.push_back(static_cast<char>(b ? 255 : 0));
  return out;
}

inline Mask decode_mask(const std::vector<char>& bytes, const std::string& file) {
  std::size_t pos = 0;
  auto token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])))
      t.push_back(bytes[pos++]);
    return t;
  };
  if (token() != "P5") throw LoadError(file, "magic", "not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw LoadError(file, "header", "malformed PGM header");
  }
  if (w <= 0 || h <= 0 || w > 65536 || h > 65536) throw LoadError(file, "header", "bad size");
  if (maxval != 255) throw LoadError(file, "header", "maxval must be 255");
  ++pos;  // single whitespace after maxval
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() < pos || bytes.size() - pos != n)
    throw LoadError(file, "data", "pixel count does not match header");
  Mask m(w, h);
  for (std::size_t i = 0; i < n; ++i) m.bits[i] = bytes[pos + i] != 0 ? 1 : 0;
  return m;
}

// ---------------------------------------------------------------------------
// OBJ: positions and triangles; vertex colors as "#vc r g b" comment lines after each vertex.

inline std::string encode_obj(const TriMesh& mesh) {
  std::string out;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    out += "v " + format_real(v.x()) + " " + format_real(v.y()) + " " + format_real(v.z()) + "\n";
    if (!mesh.colors.empty()) {
      const auto& c = mesh.colors[i];
      out += "#vc " + format_real(c.x()) + " " + format_real(c.y()) + " " + format_real(c.z()) +
             "\n";
    }
  }
  for (const auto& t : mesh.triangles)
    out += "f " + std::to_string(t[0] + 1) + " " + std::to_string(t[1] + 1) + " " +
           std::to_string(t[2] + 1) + "\n";
  return out;
}

inline TriMesh decode_obj(const std::string& text, const std::string& file) {
  TriMesh mesh;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool any_color = false;
  auto fail = [&](const std::string& what) {
    throw LoadError(file, "line " + std::to_string(line_no), what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) fail("malformed vertex");
      mesh.vertices.emplace_back(x, y, z);
      double r, g, b;
      if (ls >> r >> g >> b) {
        mesh.colors.resize(mesh.vertices.size() - 1, Vec3::Zero());
        mesh.colors.emplace_back(r, g, b);
        any_color = true;
      }
    } else if (tag == "#vc") {
      double r, g, b;
      if (!(ls >> r >> g >> b) || mesh.vertices.empty()) fail("malformed vertex color");
      mesh.colors.resize(mesh.vertices.size() - 1, Vec3::Zero());
      mesh.colors.emplace_back(r, g, b);
      any_color = true;
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        try {
          int i = std::stoi(tok.substr(0, tok.find('/')));
          i = i < 0 ? static_cast<int>(mesh.vertices.size()) + i : i - 1;
          idx.push_back(i);
        } catch (const std::exception&) {
          fail("malformed face index");
        }
      }
      if (idx.size() < 3) fail("face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k)
        mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  if (any_color) mesh.colors.resize(mesh.vertices.size(), Vec3::Zero());
  try {
    mesh.validate();
  } catch (const ArgumentError& e) {
    throw LoadError(file, "faces", e.what());
  }
  return mesh;
}

inline TriMesh load_obj(const fs::path& path) {
  const auto bytes = read_file_bytes(path, "mesh");
  return decode_obj(std::string(bytes.begin(), bytes.end()), path.string());
}

inline void save_obj(const TriMesh& mesh, const fs::path& path) {
  write_file_bytes(path, encode_obj(mesh));
}

// Similarity transform as text: "scale s", "rotation r00 .. r22" (row-major), "translation x y z".
inline std::string format_transform(const SimilarityTransform& T) {
  std::string out = "scale " + format_real(T.s) + "\nrotation";
  for (int k = 0; k < 9; ++k) out += " " + format_real(T.R(k / 3, k % 3));
  out += "\ntranslation " + format_real(T.t.x()) + " " + format_real(T.t.y()) + " " +
         format_real(T.t.z()) + "\n";
  return out;
}

inline SimilarityTransform parse_transform(const std::string& text, const std::string& file) {
  SimilarityTransform T;
  bool has_s = false, has_r = false, has_t = false;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "scale") {
      has_s = static_cast<bool>(ls >> T.s);
    } else if (key == "rotation") {
      has_r = true;
      for (int k = 0; k < 9; ++k) has_r = has_r && static_cast<bool>(ls >> T.R(k / 3, k % 3));
    } else if (key == "translation") {
      has_t = static_cast<bool>(ls >> T.t.x() >> T.t.y() >> T.t.z());
    }
  }
  if (!has_s || !has_r || !has_t) throw LoadError(file, "transform", "missing or malformed field");
  return T;
}

// ---------------------------------------------------------------------------
// Bundle directory: manifest.json + depth/ + masks/.

namespace detail {

using nlohmann::json;

inline json camera_to_json(const CameraModel& c) {
  json j;
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["width"] = c.width;
  j["height"] = c.height;
  j["rotation"] = json::array();
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) j["rotation"].push_back(c.R(r, k));
  j["translation"] = {c.t.x(), c.t.y(), c.t.z()};
  return j;
}

template <class F>
auto guarded(const std::string& file, const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const LoadError&) {
    throw;
  } catch (const std::exception& e) {
    throw LoadError(file, field, e.what());
  }
}

inline Vec3 json_vec3(const json& j, const std::string& file, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw LoadError(file, field, "expected 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw LoadError(file, field, "expected 3 numbers");
    v(i) = j[i].get<double>();
  }
  if (!is_finite(v)) throw LoadError(file, field, "non-finite value");
  return v;
}

inline Mat3 json_mat3(const json& j, const std::string& file, const std::string& field) {
  if (!j.is_array() || j.size() != 9) throw LoadError(file, field, "expected 9 numbers");
  Mat3 m;
  for (int i = 0; i < 9; ++i) {
    if (!j[i].is_number()) throw LoadError(file, field, "expected 9 numbers");
    m(i / 3, i % 3) = j[i].get<double>();
  }
  return m;
}

inline CameraModel camera_from_json(const json& j, const std::string& file,
                                    const std::string& field) {
  CameraModel c;
  guarded(file, field, [&] {
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    return 0;
  });
  c.R = json_mat3(j.contains("rotation") ? j["rotation"] : json(), file, field + ".rotation");
  c.t = json_vec3(j.contains("translation") ? j["translation"] : json(), file,
                  field + ".translation");
  try {
    c.validate();
  } catch (const ArgumentError& e) {
    throw LoadError(file, field, e.what());
  }
  return c;
}

inline std::string frame_tag(int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d", id);
  return buf;
}

}  // namespace detail

inline std::string depth_path_for(int frame_id) {
  return "depth/" + detail::frame_tag(frame_id) + ".depth";
}

inline std::string mask_path_for(int frame_id, int track) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "masks/%06d_%04d.pgm", frame_id, track);
  return buf;
}

inline void save_bundle(const SceneBundle& bundle, const fs::path& dir) {
  using nlohmann::json;
  json manifest;
  manifest["format"] = "c3dr-bundle";
  manifest["version"] = 1;
  manifest["units"] = "meters";
  manifest["gravity"] = {bundle.gravity.x(), bundle.gravity.y(), bundle.gravity.z()};
  manifest["frames"] = json::array();
  for (const auto& f : bundle.frames) {
    json jf;
    jf["id"] = f.id;
    jf["camera"] = detail::camera_to_json(f.camera);
    jf["depth"] = depth_path_for(f.id);
    if (f.image) jf["image"] = *f.image;
    jf["instances"] = json::array();
    write_file_bytes(dir / depth_path_for(f.id), encode_depth(f.depth));
    for (const auto& inst : f.instances) {
      const auto rel = mask_path_for(f.id, inst.track);
      jf["instances"].push_back({{"track", inst.track}, {"category", inst.category}, {"mask", rel}});
      write_file_bytes(dir / rel, encode_mask(inst.mask));
    }
    manifest["frames"].push_back(std::move(jf));
  }
  write_file_bytes(dir / "manifest.json", manifest.dump(1) + "\n");
}

inline SceneBundle load_bundle(const fs::path& dir) {
  using nlohmann::json;
  const fs::path manifest_path = dir / "manifest.json";
  const std::string mf = manifest_path.string();
  const auto bytes = read_file_bytes(manifest_path, "manifest");
  json manifest;
  try {
    manifest = json::parse(bytes.begin(), bytes.end());
  } catch (const std::exception& e) {
    throw LoadError(mf, "manifest", std::string("malformed JSON: ") + e.what());
  }
  if (!manifest.is_object()) throw LoadError(mf, "manifest", "top level must be an object");

  SceneBundle bundle;
  if (manifest.contains("units") && manifest["units"] != "meters")
    throw LoadError(mf, "units", "only meters are supported");
  if (manifest.contains("gravity")) {
    bundle.gravity = detail::json_vec3(manifest["gravity"], mf, "gravity");
    if (std::abs(bundle.gravity.norm() - 1.0) > 1e-6)
      throw LoadError(mf, "gravity", "gravity vector must be unit length");
  } else {
    bundle.warnings.push_back(mf + ": gravity missing, defaulting to (0, 0, -1)");
  }
  if (!manifest.contains("frames") || !manifest["frames"].is_array())
    throw LoadError(mf, "frames", "missing frame list");

  int index = 0;
  for (const auto& jf : manifest["frames"]) {
    const std::string field = "frames[" + std::to_string(index++) + "]";
    Frame frame;
    frame.id = detail::guarded(mf, field + ".id", [&] { return jf.at("id").get<int>(); });
    if (!bundle.frames.empty() && frame.id <= bundle.frames.back().id)
      throw LoadError(mf, field + ".id", "frame ids must be strictly increasing");
    if (!jf.contains("camera")) throw LoadError(mf, field + ".camera", "missing camera");
    frame.camera = detail::camera_from_json(jf["camera"], mf, field + ".camera");
    const auto depth_rel = detail::guarded(mf, field + ".depth",
                                           [&] { return jf.at("depth").get<std::string>(); });
    const fs::path depth_path = dir / depth_rel;
    frame.depth = decode_depth(read_file_bytes(depth_path, "depth"), depth_path.string());
    if (frame.depth.width != frame.camera.width || frame.depth.height != frame.camera.height)
      throw LoadError(depth_path.string(), "dimensions",
                      "depth raster does not match camera image size");
    if (jf.contains("image")) frame.image = jf["image"].get<std::string>();
    if (jf.contains("instances")) {
      int k = 0;
      for (const auto& ji : jf["instances"]) {
        const std::string ifield = field + ".instances[" + std::to_string(k++) + "]";
        InstanceObservation obs;
        obs.track = detail::guarded(mf, ifield + ".track", [&] { return ji.at("track").get<int>(); });
        obs.category = detail::guarded(mf, ifield + ".category",
                                       [&] { return ji.at("category").get<std::string>(); });
        const auto mask_rel = detail::guarded(mf, ifield + ".mask",
                                              [&] { return ji.at("mask").get<std::string>(); });
        const fs::path mask_path = dir / mask_rel;
        obs.mask = decode_mask(read_file_bytes(mask_path, "mask"), mask_path.string());
        if (obs.mask.width != frame.depth.width || obs.mask.height != frame.depth.height)
          throw LoadError(mask_path.string(), "dimensions",
                          "mask " + std::to_string(obs.mask.width) + "x" +
                              std::to_string(obs.mask.height) + " does not match depth " +
                              std::to_string(frame.depth.width) + "x" +
                              std::to_string(frame.depth.height));
        for (const auto& prev : frame.instances)
          if (prev.track == obs.track)
            throw LoadError(mf, ifield + ".track", "track appears twice in one frame");
        frame.instances.push_back(std::move(obs));
      }
    }
    bundle.frames.push_back(std::move(frame));
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Scene description: scene manifest + OBJ assets referenced relative to its directory.

inline std::string encode_scene(const SceneDescription& input) {
  SceneDescription scene = input;
  scene.sort_by_id();
  auto vec = [](const Vec3& v) {
    return "[" + format_real(v.x()) + ", " + format_real(v.y()) + ", " + format_real(v.z()) + "]";
  };
  auto quote = [](const std::string& s) { return nlohmann::json(s).dump(); };
  std::string out = "{\n  \"format\": \"c3dr-scene\",\n  \"version\": 1,\n";
  out += "  \"gravity\": " + vec(scene.gravity) + ",\n";
  out += "  \"floor_height\": " + format_real(scene.floor_height) + ",\n";
  out += "  \"walls\": [";
  for (std::size_t i = 0; i < scene.walls.size(); ++i) {
    const auto& w = scene.walls[i];
    out += (i ? ",\n" : "\n");
    out += "    {\"id\": " + std::to_string(w.id) + ", \"normal\": " + vec(w.normal) +
           ", \"offset\": " + format_real(w.offset) + "}";
  }
  out += scene.walls.empty() ? "],\n" : "\n  ],\n";
  out += "  \"objects\": [";
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& o = scene.objects[i];
    out += (i ? ",\n" : "\n");
    out += "    {\n";
    out += "      \"id\": " + std::to_string(o.id) + ",\n";
    out += "      \"category\": " + quote(o.category) + ",\n";
    out += "      \"mesh\": " + quote(o.mesh_ref) + ",\n";
    out += "      \"scale\": " + format_real(o.pose.s) + ",\n";
    out += "      \"rotation\": [";
    for (int k = 0; k < 9; ++k) out += (k ? ", " : "") + format_real(o.pose.R(k / 3, k % 3));
    out += "],\n";
    out += "      \"translation\": " + vec(o.pose.t) + ",\n";
    out += "      \"relations\": [";
    for (std::size_t r = 0; r < o.relations.size(); ++r) {
      out += (r ? ", " : "");
      out += "{\"kind\": \"" + std::string(to_string(o.relations[r].kind)) +
             "\", \"target\": \"" + to_string(o.relations[r].target) + "\"}";
    }
    out += "]\n    }";
  }
  out += scene.objects.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

// Writes the scene manifest at `path` and every loaded mesh at its reference.
inline void save_scene(const SceneDescription& scene, const fs::path& path) {
  scene.validate();
  const fs::path base = path.parent_path();
  std::map<std::string, const TriMesh*> written;
  for (const auto& o : scene.objects) {
    if (o.mesh_ref.empty())
      throw ArgumentError("scene: object " + std::to_string(o.id) + " has no mesh reference");
    if (o.mesh) {
      auto [it, fresh] = written.emplace(o.mesh_ref, o.mesh.get());
      if (fresh) save_obj(*o.mesh, base / o.mesh_ref);
    } else if (!fs::exists(base / o.mesh_ref)) {
      throw ArgumentError("scene: mesh reference not resolvable: " + o.mesh_ref);
    }
  }
  write_file_bytes(path, encode_scene(scene));
}

inline SceneDescription load_scene(const fs::path& path, bool load_meshes = true) {
  using nlohmann::json;
  const std::string file = path.string();
  const auto bytes = read_file_bytes(path, "scene");
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const std::exception& e) {
    throw LoadError(file, "scene", std::string("malformed JSON: ") + e.what());
  }
  SceneDescription scene;
  scene.gravity = detail::json_vec3(j.value("gravity", json::array({0, 0, -1})), file, "gravity");
  if (std::abs(scene.gravity.norm() - 1.0) > 1e-6)
    throw LoadError(file, "gravity", "gravity vector must be unit length");
  scene.floor_height = detail::guarded(file, "floor_height",
                                       [&] { return j.value("floor_height", 0.0); });
  if (j.contains("walls")) {
    for (const auto& jw : j["walls"]) {
      WallPlane w;
      w.id = detail::guarded(file, "walls.id", [&] { return jw.at("id").get<int>(); });
      w.normal = detail::json_vec3(jw.value("normal", json()), file, "walls.normal");
      w.offset = detail::guarded(file, "walls.offset", [&] { return jw.at("offset").get<double>(); });
      scene.walls.push_back(w);
    }
  }
  if (!j.contains("objects") || !j["objects"].is_array())
    throw LoadError(file, "objects", "missing object list");
  std::map<std::string, std::shared_ptr<const TriMesh>> cache;
  int index = 0;
  for (const auto& jo : j["objects"]) {
    const std::string field = "objects[" + std::to_string(index++) + "]";
    PlacedObject o;
    detail::guarded(file, field, [&] {
      o.id = jo.at("id").get<int>();
      o.category = jo.at("category").get<std::string>();
      o.mesh_ref = jo.at("mesh").get<std::string>();
      o.pose.s = jo.at("scale").get<double>();
      return 0;
    });
    o.pose.R = detail::json_mat3(jo.value("rotation", json()), file, field + ".rotation");
    o.pose.t = detail::json_vec3(jo.value("translation", json()), file, field + ".translation");
    try {
      o.pose.validate();
    } catch (const ArgumentError& e) {
      throw LoadError(file, field + ".pose", e.what());
    }
    if (jo.contains("relations")) {
      for (const auto& jr : jo["relations"]) {
        const auto kind = parse_relation_kind(
            detail::guarded(file, field + ".relations", [&] { return jr.at("kind").get<std::string>(); }));
        const auto target = parse_relation_target(
            detail::guarded(file, field + ".relations", [&] { return jr.at("target").get<std::string>(); }));
        if (!kind || !target) throw LoadError(file, field + ".relations", "malformed relation");
        o.relations.push_back({o.id, *kind, *target});
      }
    }
    if (load_meshes) {
      auto& slot = cache[o.mesh_ref];
      if (!slot) slot = std::make_shared<const TriMesh>(load_obj(path.parent_path() / o.mesh_ref));
      o.mesh = slot;
    }
    scene.objects.push_back(std::move(o));
  }
  try {
    scene.validate();
  } catch (const ArgumentError& e) {
    throw LoadError(file, "objects", e.what());
  }
  return scene;
}

}  // namespace c3dr

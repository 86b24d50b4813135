#include "anchorfit/io.hpp"

#include "anchorfit/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace anchorfit::io {

namespace {

using Json = nlohmann::ordered_json;

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Json parse_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw SchemaError(path.string(), "cannot open file");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path.string(), std::string("JSON parse error: ") + e.what());
  }
  if (!doc.is_object())
    throw SchemaError(path.string(), "document root must be an object");
  if (!doc.contains("format_version"))
    throw SchemaError(path.string(), "missing format_version");
  if (!doc["format_version"].is_number_integer() ||
      doc["format_version"].get<int>() != kFormatVersion)
    throw SchemaError(path.string(),
                      "unsupported format_version (expected " +
                          std::to_string(kFormatVersion) + ")");
  return doc;
}

void write_document(const std::filesystem::path& path, const Json& doc) {
  std::ofstream out(path);
  if (!out) throw SchemaError(path.string(), "cannot open file for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw SchemaError(path.string(), "write failed");
}

void check_keys(const Json& obj, const std::string& where,
                const std::set<std::string>& required,
                const std::set<std::string>& optional = {}) {
  if (!obj.is_object()) throw SchemaError(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!required.count(key) && !optional.count(key))
      throw SchemaError(where, "unknown key \"" + key + "\"");
  }
  for (const auto& key : required)
    if (!obj.contains(key)) throw SchemaError(where, "missing key \"" + key + "\"");
}

double get_number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw SchemaError(where, "expected a number");
  return j.get<double>();
}

int get_int(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) throw SchemaError(where, "expected an integer");
  return j.get<int>();
}

Vec3 get_vec3(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw SchemaError(where, "expected an array of 3 numbers");
  return {get_number(j[0], where), get_number(j[1], where),
          get_number(j[2], where)};
}

Vec2 get_vec2(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2)
    throw SchemaError(where, "expected an array of 2 numbers");
  return {get_number(j[0], where), get_number(j[1], where)};
}

Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }
Json vec2_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

}  // namespace

BodyModel load_rig(const std::filesystem::path& path) {
  const std::string d = path.string();
  const Json doc = parse_document(path);
  check_keys(doc, d,
             {"format_version", "joints", "vertices", "faces", "weights",
              "contact_candidates", "keypoint_map"},
             {"shape_dirs"});
  BodyModel model;

  int ji = 0;
  for (const auto& j : doc["joints"]) {
    const std::string where = d + ": joints[" + std::to_string(ji++) + "]";
    check_keys(j, where, {"name", "parent", "offset", "radius"});
    if (!j["name"].is_string()) throw SchemaError(where, "name must be a string");
    model.tree.joint_name.push_back(j["name"].get<std::string>());
    model.tree.parent.push_back(get_int(j["parent"], where + ".parent"));
    model.tree.rest_offset.push_back(get_vec3(j["offset"], where + ".offset"));
    const double r = get_number(j["radius"], where + ".radius");
    if (r < 0) throw SchemaError(where + ".radius", "must be >= 0");
    model.bone_radii.push_back(r);
  }

  int vi = 0;
  for (const auto& v : doc["vertices"])
    model.template_vertices.push_back(
        get_vec3(v, d + ": vertices[" + std::to_string(vi++) + "]"));

  int fi = 0;
  for (const auto& f : doc["faces"]) {
    const std::string where = d + ": faces[" + std::to_string(fi++) + "]";
    if (!f.is_array() || f.size() != 3)
      throw SchemaError(where, "expected 3 indices");
    model.faces.push_back({get_int(f[0], where), get_int(f[1], where),
                           get_int(f[2], where)});
  }

  model.skin_weights.resize(model.template_vertices.size());
  std::set<int> weighted;
  int wi = 0;
  for (const auto& w : doc["weights"]) {
    const std::string where = d + ": weights[" + std::to_string(wi++) + "]";
    check_keys(w, where, {"vertex", "influences"});
    const int v = get_int(w["vertex"], where + ".vertex");
    if (v < 0 || v >= model.vertex_count() || !weighted.insert(v).second)
      throw SchemaError(where + ".vertex", "invalid or duplicate vertex index");
    for (const auto& iw : w["influences"]) {
      if (!iw.is_array() || iw.size() != 2)
        throw SchemaError(where + ".influences", "expected [joint, weight]");
      model.skin_weights[v].push_back(
          {get_int(iw[0], where), get_number(iw[1], where)});
    }
  }
  if (static_cast<int>(weighted.size()) != model.vertex_count())
    throw SchemaError(d + ": weights", "every vertex needs a weight entry");

  for (const auto& c : doc["contact_candidates"])
    model.contact_candidates.push_back(get_int(c, d + ": contact_candidates"));

  int ki = 0;
  for (const auto& k : doc["keypoint_map"]) {
    const std::string where = d + ": keypoint_map[" + std::to_string(ki++) + "]";
    if (!k.is_array() || k.size() != 2)
      throw SchemaError(where, "expected [detector_index, joint_index]");
    model.keypoint_map.emplace_back(get_int(k[0], where), get_int(k[1], where));
  }

  if (doc.contains("shape_dirs")) {
    int ci = 0;
    for (const auto& coeff : doc["shape_dirs"]) {
      const std::string where =
          d + ": shape_dirs[" + std::to_string(ci++) + "]";
      std::vector<Vec3> dirs;
      for (const auto& v : coeff) dirs.push_back(get_vec3(v, where));
      model.shape_dirs.push_back(std::move(dirs));
    }
  }

  try {
    model.validate();
  } catch (const Error& e) {
    throw SchemaError(d, e.what());
  }
  return model;
}

void save_rig(const std::filesystem::path& path, const BodyModel& model) {
  Json doc;
  doc["format_version"] = kFormatVersion;
  Json joints = Json::array();
  for (int k = 0; k < model.tree.joint_count(); ++k) {
    Json j;
    j["name"] = model.tree.joint_name[k];
    j["parent"] = model.tree.parent[k];
    j["offset"] = vec3_json(model.tree.rest_offset[k]);
    j["radius"] = model.bone_radii[k];
    joints.push_back(j);
  }
  doc["joints"] = std::move(joints);
  Json vertices = Json::array();
  for (const auto& v : model.template_vertices) vertices.push_back(vec3_json(v));
  doc["vertices"] = std::move(vertices);
  Json faces = Json::array();
  for (const auto& f : model.faces) faces.push_back(Json::array({f[0], f[1], f[2]}));
  doc["faces"] = std::move(faces);
  Json weights = Json::array();
  for (int v = 0; v < model.vertex_count(); ++v) {
    Json w;
    w["vertex"] = v;
    Json infl = Json::array();
    for (const auto& iw : model.skin_weights[v])
      infl.push_back(Json::array({iw.joint, iw.weight}));
    w["influences"] = std::move(infl);
    weights.push_back(w);
  }
  doc["weights"] = std::move(weights);
  doc["contact_candidates"] = model.contact_candidates;
  Json map = Json::array();
  for (const auto& [det, joint] : model.keypoint_map)
    map.push_back(Json::array({det, joint}));
  doc["keypoint_map"] = std::move(map);
  if (!model.shape_dirs.empty()) {
    Json dirs = Json::array();
    for (const auto& coeff : model.shape_dirs) {
      Json per = Json::array();
      for (const auto& v : coeff) per.push_back(vec3_json(v));
      dirs.push_back(std::move(per));
    }
    doc["shape_dirs"] = std::move(dirs);
  }
  write_document(path, doc);
}

std::vector<Camera> load_cameras(const std::filesystem::path& path) {
  const std::string d = path.string();
  const Json doc = parse_document(path);
  check_keys(doc, d, {"format_version", "cameras"});
  std::vector<Camera> cameras;
  int ci = 0;
  for (const auto& c : doc["cameras"]) {
    const std::string where = d + ": cameras[" + std::to_string(ci++) + "]";
    check_keys(c, where, {"focal", "principal", "image_size", "extrinsic"});
    Camera cam;
    cam.focal = get_vec2(c["focal"], where + ".focal");
    cam.principal = get_vec2(c["principal"], where + ".principal");
    const Vec2 size = get_vec2(c["image_size"], where + ".image_size");
    cam.width = static_cast<int>(size.x());
    cam.height = static_cast<int>(size.y());
    if (!c["extrinsic"].is_array() || c["extrinsic"].size() != 12)
      throw SchemaError(where + ".extrinsic",
                        "expected 12 numbers (row-major 3x4)");
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col)
        cam.extrinsic.linear(r, col) =
            get_number(c["extrinsic"][4 * r + col], where + ".extrinsic");
      cam.extrinsic.translation[r] =
          get_number(c["extrinsic"][4 * r + 3], where + ".extrinsic");
    }
    try {
      cam.validate();
    } catch (const Error& e) {
      throw SchemaError(where, e.what());
    }
    cameras.push_back(cam);
  }
  if (cameras.empty()) throw SchemaError(d, "camera list is empty");
  return cameras;
}

void save_cameras(const std::filesystem::path& path,
                  std::span<const Camera> cameras) {
  Json doc;
  doc["format_version"] = kFormatVersion;
  Json list = Json::array();
  for (const auto& cam : cameras) {
    Json c;
    c["focal"] = vec2_json(cam.focal);
    c["principal"] = vec2_json(cam.principal);
    c["image_size"] = Json::array({cam.width, cam.height});
    Json ext = Json::array();
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) ext.push_back(cam.extrinsic.linear(r, col));
      ext.push_back(cam.extrinsic.translation[r]);
    }
    c["extrinsic"] = std::move(ext);
    list.push_back(c);
  }
  doc["cameras"] = std::move(list);
  write_document(path, doc);
}

std::vector<std::vector<KeypointFrame>> load_keypoints(
    const std::filesystem::path& path) {
  const std::string d = path.string();
  const Json doc = parse_document(path);
  check_keys(doc, d, {"format_version", "frames"});
  std::vector<std::vector<KeypointFrame>> frames;
  int fi = 0;
  for (const auto& frame : doc["frames"]) {
    const std::string fwhere = d + ": frames[" + std::to_string(fi++) + "]";
    if (!frame.is_array()) throw SchemaError(fwhere, "expected an array of views");
    std::vector<KeypointFrame> views;
    int vi = 0;
    for (const auto& view : frame) {
      const std::string where = fwhere + "[" + std::to_string(vi++) + "]";
      check_keys(view, where, {"view_id", "points", "confidence"});
      KeypointFrame kf;
      kf.view_id = get_int(view["view_id"], where + ".view_id");
      for (const auto& p : view["points"])
        kf.points.push_back(get_vec2(p, where + ".points"));
      for (const auto& c : view["confidence"])
        kf.confidence.push_back(get_number(c, where + ".confidence"));
      try {
        kf.validate();
      } catch (const Error& e) {
        throw SchemaError(where, e.what());
      }
      views.push_back(std::move(kf));
    }
    frames.push_back(std::move(views));
  }
  return frames;
}

void save_keypoints(const std::filesystem::path& path,
                    std::span<const std::vector<KeypointFrame>> frames) {
  Json doc;
  doc["format_version"] = kFormatVersion;
  Json flist = Json::array();
  for (const auto& frame : frames) {
    Json views = Json::array();
    for (const auto& kf : frame) {
      Json v;
      v["view_id"] = kf.view_id;
      Json pts = Json::array();
      for (const auto& p : kf.points) pts.push_back(vec2_json(p));
      v["points"] = std::move(pts);
      v["confidence"] = kf.confidence;
      views.push_back(v);
    }
    flist.push_back(std::move(views));
  }
  doc["frames"] = std::move(flist);
  write_document(path, doc);
}

ContactPairSet load_contacts(const std::filesystem::path& path) {
  const std::string d = path.string();
  const Json doc = parse_document(path);
  check_keys(doc, d, {"format_version", "tau_n", "tau_d", "pairs"});
  ContactPairSet set;
  set.tau_n = get_number(doc["tau_n"], d + ": tau_n");
  set.tau_d = get_number(doc["tau_d"], d + ": tau_d");
  int pi = 0;
  std::set<int> seen;
  for (const auto& p : doc["pairs"]) {
    const std::string where = d + ": pairs[" + std::to_string(pi++) + "]";
    if (!p.is_array() || p.size() != 2)
      throw SchemaError(where, "expected [sample_index, vertex_index]");
    const int i = get_int(p[0], where);
    const int j = get_int(p[1], where);
    if (i < 0 || j < 0) throw SchemaError(where, "indices must be >= 0");
    if (!seen.insert(i).second)
      throw SchemaError(where, "duplicate object sample index");
    set.pairs.emplace_back(i, j);
  }
  return set;
}

void save_contacts(const std::filesystem::path& path,
                   const ContactPairSet& contacts) {
  Json doc;
  doc["format_version"] = kFormatVersion;
  doc["tau_n"] = contacts.tau_n;
  doc["tau_d"] = contacts.tau_d;
  Json pairs = Json::array();
  for (const auto& [i, j] : contacts.pairs) pairs.push_back(Json::array({i, j}));
  doc["pairs"] = std::move(pairs);
  write_document(path, doc);
}

std::vector<FrameState> load_params(const std::filesystem::path& path) {
  const std::string d = path.string();
  const Json doc = parse_document(path);
  check_keys(doc, d, {"format_version", "frames"});
  std::vector<FrameState> frames;
  int fi = 0;
  for (const auto& f : doc["frames"]) {
    const std::string fwhere = d + ": frames[" + std::to_string(fi++) + "]";
    check_keys(f, fwhere, {"human"}, {"object"});
    const auto& h = f["human"];
    const std::string hwhere = fwhere + ".human";
    check_keys(h, hwhere, {"scale", "root_rot", "root_trans", "joint_rots"},
               {"shape"});
    FrameState fs;
    fs.human.scale = get_number(h["scale"], hwhere + ".scale");
    if (!(fs.human.scale > 0)) throw SchemaError(hwhere + ".scale", "must be > 0");
    fs.human.root_rotation = get_vec3(h["root_rot"], hwhere + ".root_rot");
    fs.human.root_translation = get_vec3(h["root_trans"], hwhere + ".root_trans");
    for (const auto& r : h["joint_rots"])
      fs.human.joint_rotations.push_back(get_vec3(r, hwhere + ".joint_rots"));
    if (h.contains("shape")) {
      std::vector<double> shape;
      for (const auto& s : h["shape"])
        shape.push_back(get_number(s, hwhere + ".shape"));
      fs.human.shape_coeffs =
          Eigen::Map<Eigen::VectorXd>(shape.data(), shape.size());
    } else {
      fs.human.shape_coeffs = Eigen::VectorXd();
    }
    if (f.contains("object")) {
      const std::string owhere = fwhere + ".object";
      check_keys(f["object"], owhere, {"rot", "trans"});
      fs.object.emplace();
      fs.object->rotation = get_vec3(f["object"]["rot"], owhere + ".rot");
      fs.object->translation = get_vec3(f["object"]["trans"], owhere + ".trans");
    }
    frames.push_back(std::move(fs));
  }
  if (frames.empty()) throw SchemaError(d, "parameter sequence is empty");
  return frames;
}

void save_params(const std::filesystem::path& path,
                 std::span<const FrameState> frames) {
  Json doc;
  doc["format_version"] = kFormatVersion;
  Json flist = Json::array();
  for (const auto& fs : frames) {
    Json f;
    Json h;
    h["scale"] = fs.human.scale;
    h["root_rot"] = vec3_json(fs.human.root_rotation);
    h["root_trans"] = vec3_json(fs.human.root_translation);
    Json rots = Json::array();
    for (const auto& r : fs.human.joint_rotations) rots.push_back(vec3_json(r));
    h["joint_rots"] = std::move(rots);
    if (fs.human.shape_coeffs.size() > 0) {
      Json shape = Json::array();
      for (int i = 0; i < fs.human.shape_coeffs.size(); ++i)
        shape.push_back(fs.human.shape_coeffs[i]);
      h["shape"] = std::move(shape);
    }
    f["human"] = std::move(h);
    if (fs.object.has_value()) {
      Json o;
      o["rot"] = vec3_json(fs.object->rotation);
      o["trans"] = vec3_json(fs.object->translation);
      f["object"] = std::move(o);
    }
    flist.push_back(std::move(f));
  }
  doc["frames"] = std::move(flist);
  write_document(path, doc);
}

Mesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string(), "cannot open file");
  Mesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x() >> v.y() >> v.z()))
        throw SchemaError(path.string() + ":" + std::to_string(line_no),
                          "malformed vertex line");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string token;
      while (ss >> token) {
        const size_t slash = token.find('/');
        if (slash != std::string::npos) token = token.substr(0, slash);
        int v = 0;
        try {
          v = std::stoi(token);
        } catch (...) {
          throw SchemaError(path.string() + ":" + std::to_string(line_no),
                            "malformed face index");
        }
        if (v <= 0)
          throw SchemaError(path.string() + ":" + std::to_string(line_no),
                            "face indices must be positive");
        idx.push_back(v - 1);
      }
      if (idx.size() != 3)
        throw SchemaError(path.string() + ":" + std::to_string(line_no),
                          "only triangles are supported");
      mesh.faces.push_back({idx[0], idx[1], idx[2]});
    }
    // Other directives (vn, vt, o, g, s, usemtl, #, ...) are ignored.
  }
  try {
    mesh.validate();
  } catch (const Error& e) {
    throw SchemaError(path.string(), e.what());
  }
  if (mesh.empty()) throw SchemaError(path.string(), "mesh has no vertices");
  return mesh;
}

void save_obj(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw SchemaError(path.string(), "cannot open file for writing");
  for (const auto& v : mesh.vertices)
    out << "v " << shortest(v.x()) << " " << shortest(v.y()) << " "
        << shortest(v.z()) << "\n";
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
  if (!out) throw SchemaError(path.string(), "write failed");
}

namespace {

void load_weights(const Json& j, const std::string& where, LossWeights& w,
                  bool& sigma_dist_given) {
  check_keys(j, where, {},
             {"lambda_j", "lambda_c", "lambda_pen", "lambda_reg",
              "gm_sigma_align", "gm_sigma_dist", "smooth_weight",
              "self_pen_weight", "pose_prior_weight"});
  auto nonneg = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    out = get_number(j[key], where + "." + key);
    if (!(out >= 0.0) || !std::isfinite(out))
      throw SchemaError(where + "." + key, "must be finite and >= 0");
  };
  auto positive = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    out = get_number(j[key], where + "." + key);
    if (!(out > 0.0) || !std::isfinite(out))
      throw SchemaError(where + "." + key, "must be finite and > 0");
  };
  nonneg("lambda_j", w.lambda_j);
  nonneg("lambda_c", w.lambda_c);
  nonneg("lambda_pen", w.lambda_pen);
  nonneg("lambda_reg", w.lambda_reg);
  positive("gm_sigma_align", w.gm_sigma_align);
  if (j.contains("gm_sigma_dist")) {
    positive("gm_sigma_dist", w.gm_sigma_dist);
    sigma_dist_given = true;
  }
  nonneg("smooth_weight", w.smooth_weight);
  nonneg("self_pen_weight", w.self_pen_weight);
  nonneg("pose_prior_weight", w.pose_prior_weight);
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
  const std::string d = path.string();
  const Json doc = parse_document(path);
  check_keys(doc, d, {"format_version"},
             {"stage", "paths", "loss_weights", "contact", "adam"});
  RunConfig config;

  if (doc.contains("stage")) {
    if (!doc["stage"].is_string())
      throw SchemaError(d + ": stage", "expected a string");
    config.stage = doc["stage"].get<std::string>();
    if (config.stage != "static" && config.stage != "motion")
      throw SchemaError(d + ": stage", "must be \"static\" or \"motion\"");
  }

  if (doc.contains("paths")) {
    const std::string where = d + ": paths";
    check_keys(doc["paths"], where, {},
               {"rig", "cameras", "keypoints", "contacts", "object", "init",
                "truth", "output_dir"});
    auto str = [&](const char* key, std::string& out) {
      if (!doc["paths"].contains(key)) return;
      if (!doc["paths"][key].is_string())
        throw SchemaError(where + "." + key, "expected a string");
      out = doc["paths"][key].get<std::string>();
    };
    auto& p = config.paths;
    str("rig", p.rig);
    str("cameras", p.cameras);
    str("keypoints", p.keypoints);
    str("contacts", p.contacts);
    str("object", p.object);
    str("init", p.init);
    str("truth", p.truth);
    str("output_dir", p.output_dir);
    // Relative paths are taken relative to the config file. Referenced input
    // paths must exist; the output directory is created on demand.
    const std::filesystem::path base = path.parent_path();
    auto resolve = [&](const char* key, std::string& value, bool must_exist) {
      if (value.empty()) return;
      std::filesystem::path rp(value);
      if (!rp.is_absolute()) rp = base / rp;
      value = rp.lexically_normal().string();
      if (must_exist && !std::filesystem::exists(value))
        throw SchemaError(where + "." + key,
                          "referenced path does not exist: " + value);
    };
    resolve("rig", p.rig, true);
    resolve("cameras", p.cameras, true);
    resolve("keypoints", p.keypoints, true);
    resolve("contacts", p.contacts, true);
    resolve("object", p.object, true);
    resolve("init", p.init, true);
    resolve("truth", p.truth, true);
    resolve("output_dir", p.output_dir, false);
  }

  if (doc.contains("loss_weights"))
    load_weights(doc["loss_weights"], d + ": loss_weights", config.weights,
                 config.sigma_dist_given);

  if (doc.contains("contact")) {
    const std::string where = d + ": contact";
    check_keys(doc["contact"], where, {},
               {"n_samples", "tau_n", "tau_d", "seed_index", "normal_gate"});
    const auto& c = doc["contact"];
    if (c.contains("n_samples"))
      config.contact.n_samples = get_int(c["n_samples"], where + ".n_samples");
    if (c.contains("tau_n"))
      config.contact.tau_n = get_number(c["tau_n"], where + ".tau_n");
    if (c.contains("tau_d"))
      config.contact.tau_d = get_number(c["tau_d"], where + ".tau_d");
    if (c.contains("seed_index"))
      config.contact.seed_index = get_int(c["seed_index"], where + ".seed_index");
    if (c.contains("normal_gate")) {
      if (!c["normal_gate"].is_string())
        throw SchemaError(where + ".normal_gate", "expected a string");
      const std::string gate = c["normal_gate"].get<std::string>();
      if (gate == "antiparallel")
        config.contact.gate = NormalGate::Antiparallel;
      else if (gate == "printed")
        config.contact.gate = NormalGate::Printed;
      else
        throw SchemaError(where + ".normal_gate",
                          "must be \"antiparallel\" or \"printed\"");
    }
    try {
      config.contact.validate();
    } catch (const Error& e) {
      throw SchemaError(where, e.what());
    }
  }

  if (doc.contains("adam")) {
    const std::string where = d + ": adam";
    check_keys(doc["adam"], where, {},
               {"learning_rate", "beta1", "beta2", "eps", "iterations_static",
                "iterations_motion", "convergence_tol", "seed"});
    const auto& a = doc["adam"];
    if (a.contains("learning_rate"))
      config.adam.learning_rate = get_number(a["learning_rate"], where + ".learning_rate");
    if (a.contains("beta1")) config.adam.beta1 = get_number(a["beta1"], where + ".beta1");
    if (a.contains("beta2")) config.adam.beta2 = get_number(a["beta2"], where + ".beta2");
    if (a.contains("eps")) config.adam.eps = get_number(a["eps"], where + ".eps");
    if (a.contains("iterations_static"))
      config.adam.iterations_static = get_int(a["iterations_static"], where + ".iterations_static");
    if (a.contains("iterations_motion"))
      config.adam.iterations_motion = get_int(a["iterations_motion"], where + ".iterations_motion");
    if (a.contains("convergence_tol"))
      config.adam.convergence_tol = get_number(a["convergence_tol"], where + ".convergence_tol");
    if (a.contains("seed"))
      config.adam.seed = static_cast<uint64_t>(get_int(a["seed"], where + ".seed"));
    try {
      config.adam.validate();
    } catch (const Error& e) {
      throw SchemaError(where, e.what());
    }
  }
  return config;
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
  Json doc;
  doc["format_version"] = kFormatVersion;
  if (!config.stage.empty()) doc["stage"] = config.stage;
  Json paths;
  auto put = [&](const char* key, const std::string& v) {
    if (!v.empty()) paths[key] = v;
  };
  put("rig", config.paths.rig);
  put("cameras", config.paths.cameras);
  put("keypoints", config.paths.keypoints);
  put("contacts", config.paths.contacts);
  put("object", config.paths.object);
  put("init", config.paths.init);
  put("truth", config.paths.truth);
  put("output_dir", config.paths.output_dir);
  if (!paths.empty()) doc["paths"] = std::move(paths);
  Json w;
  w["lambda_j"] = config.weights.lambda_j;
  w["lambda_c"] = config.weights.lambda_c;
  w["lambda_pen"] = config.weights.lambda_pen;
  w["lambda_reg"] = config.weights.lambda_reg;
  w["gm_sigma_align"] = config.weights.gm_sigma_align;
  if (config.sigma_dist_given) w["gm_sigma_dist"] = config.weights.gm_sigma_dist;
  w["smooth_weight"] = config.weights.smooth_weight;
  w["self_pen_weight"] = config.weights.self_pen_weight;
  w["pose_prior_weight"] = config.weights.pose_prior_weight;
  doc["loss_weights"] = std::move(w);
  Json c;
  c["n_samples"] = config.contact.n_samples;
  c["tau_n"] = config.contact.tau_n;
  c["tau_d"] = config.contact.tau_d;
  c["seed_index"] = config.contact.seed_index;
  c["normal_gate"] = config.contact.gate == NormalGate::Antiparallel
                         ? "antiparallel"
                         : "printed";
  doc["contact"] = std::move(c);
  Json a;
  a["learning_rate"] = config.adam.learning_rate;
  a["beta1"] = config.adam.beta1;
  a["beta2"] = config.adam.beta2;
  a["eps"] = config.adam.eps;
  a["iterations_static"] = config.adam.iterations_static;
  a["iterations_motion"] = config.adam.iterations_motion;
  a["convergence_tol"] = config.adam.convergence_tol;
  a["seed"] = static_cast<int64_t>(config.adam.seed);
  doc["adam"] = std::move(a);
  write_document(path, doc);
}

void save_trace_csv(const std::filesystem::path& path,
                    const OptimizationTrace& trace) {
  std::ofstream out(path);
  if (!out) throw SchemaError(path.string(), "cannot open file for writing");
  out << "iteration,body,contact,penetration,regularization,total\n";
  for (const auto& e : trace.entries) {
    out << e.iteration << "," << shortest(e.loss.body) << ","
        << shortest(e.loss.contact) << "," << shortest(e.loss.penetration)
        << "," << shortest(e.loss.regularization) << ","
        << shortest(e.loss.total) << "\n";
  }
  if (!out) throw SchemaError(path.string(), "write failed");
}

void save_metrics(const std::filesystem::path& json_path,
                  const std::filesystem::path& csv_path,
                  const MetricsRecord& record) {
  Json doc;
  doc["format_version"] = kFormatVersion;
  auto frame_json = [](const FrameMetrics& m) {
    Json j;
    j["joint_error"] = m.joint_error;
    j["joint_error_root_aligned"] = m.joint_error_root_aligned;
    j["reprojection_error"] = m.reprojection_error;
    j["contact_distance"] = m.contact_distance;
    j["penetration_fraction"] = m.penetration_fraction;
    j["penetration_depth"] = m.penetration_depth;
    return j;
  };
  doc["mean"] = frame_json(record.mean);
  doc["jitter_params"] = record.jitter_params;
  doc["jitter_joints"] = record.jitter_joints;
  doc["jitter_params_truth"] = record.jitter_params_truth;
  doc["jitter_joints_truth"] = record.jitter_joints_truth;
  Json frames = Json::array();
  for (const auto& m : record.frames) frames.push_back(frame_json(m));
  doc["frames"] = std::move(frames);
  write_document(json_path, doc);

  std::ofstream out(csv_path);
  if (!out) throw SchemaError(csv_path.string(), "cannot open file for writing");
  out << "frame,joint_error,joint_error_root_aligned,reprojection_error,"
         "contact_distance,penetration_fraction,penetration_depth\n";
  for (size_t f = 0; f < record.frames.size(); ++f) {
    const auto& m = record.frames[f];
    out << f << "," << shortest(m.joint_error) << ","
        << shortest(m.joint_error_root_aligned) << ","
        << shortest(m.reprojection_error) << "," << shortest(m.contact_distance)
        << "," << shortest(m.penetration_fraction) << ","
        << shortest(m.penetration_depth) << "\n";
  }
  const auto& m = record.mean;
  out << "mean," << shortest(m.joint_error) << ","
      << shortest(m.joint_error_root_aligned) << ","
      << shortest(m.reprojection_error) << "," << shortest(m.contact_distance)
      << "," << shortest(m.penetration_fraction) << ","
      << shortest(m.penetration_depth) << "\n";
  if (!out) throw SchemaError(csv_path.string(), "write failed");
}

void save_contact_diagnostics(const std::filesystem::path& path,
                              std::span<const ContactDiagnostic> rows) {
  std::ofstream out(path);
  if (!out) throw SchemaError(path.string(), "cannot open file for writing");
  out << "sample,vertex,distance,normal_gate,rho_distance\n";
  for (const auto& r : rows)
    out << r.sample << "," << r.vertex << "," << shortest(r.distance) << ","
        << shortest(r.normal_gate) << "," << shortest(r.rho_distance) << "\n";
  if (!out) throw SchemaError(path.string(), "write failed");
}

}  // namespace anchorfit::io

#include "facecorr/mesh_io.hpp"

#include "facecorr/error.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace facecorr {

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
    fail_io(path + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_input(const std::string& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) fail_io("cannot open '" + path + "' for reading");
    return in;
}

std::ofstream open_output(const std::string& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) fail_io("cannot open '" + path + "' for writing");
    return out;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> tokens;
    std::istringstream iss(line);
    std::string tok;
    while (iss >> tok) tokens.push_back(tok);
    return tokens;
}

double parse_double(const std::string& tok, const std::string& path, int line) {
    try {
        size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        parse_fail(path, line, "expected a number, got '" + tok + "'");
    }
}

int parse_int(const std::string& tok, const std::string& path, int line) {
    int v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        parse_fail(path, line, "expected an integer, got '" + tok + "'");
    return v;
}

}  // namespace

ObjContents read_obj(const std::string& path) {
    auto in = open_input(path);
    ObjContents obj;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto tokens = split_ws(line);
        if (tokens.empty()) continue;
        const std::string& kind = tokens[0];
        if (kind == "v") {
            if (tokens.size() != 4) parse_fail(path, lineno, "vertex line must be 'v x y z'");
            obj.vertices.emplace_back(parse_double(tokens[1], path, lineno), parse_double(tokens[2], path, lineno),
                                      parse_double(tokens[3], path, lineno));
        } else if (kind == "vn") {
            if (tokens.size() != 4) parse_fail(path, lineno, "normal line must be 'vn x y z'");
            obj.normals.emplace_back(parse_double(tokens[1], path, lineno), parse_double(tokens[2], path, lineno),
                                     parse_double(tokens[3], path, lineno));
        } else if (kind == "f") {
            if (tokens.size() > 4) parse_fail(path, lineno, "only triangle faces are supported");
            if (tokens.size() != 4) parse_fail(path, lineno, "face line must be 'f i j k'");
            std::array<int, 3> face;
            for (int c = 0; c < 3; ++c) {
                std::string tok = tokens[c + 1];
                // Tolerate the common i/j/k and i//k forms by taking the
                // leading vertex index.
                if (const auto slash = tok.find('/'); slash != std::string::npos) tok = tok.substr(0, slash);
                const int idx = parse_int(tok, path, lineno);
                if (idx < 1 || idx > static_cast<int>(obj.vertices.size()))
                    parse_fail(path, lineno,
                               "face index " + std::to_string(idx) + " out of range (1.." +
                                   std::to_string(obj.vertices.size()) + ")");
                face[c] = idx - 1;
            }
            obj.faces.push_back(face);
        } else {
            parse_fail(path, lineno, "unsupported record '" + kind + "'");
        }
    }
    return obj;
}

TriMesh read_obj_mesh(const std::string& path) {
    auto obj = read_obj(path);
    require(!obj.faces.empty(), ErrorCode::Io, "'" + path + "' contains no faces; expected a mesh");
    TriMesh mesh{std::move(obj.vertices), std::move(obj.faces)};
    validate(mesh);
    return mesh;
}

PointCloud read_obj_cloud(const std::string& path) {
    auto obj = read_obj(path);
    require(obj.faces.empty(), ErrorCode::Io, "'" + path + "' contains faces; expected a point cloud");
    PointCloud cloud;
    cloud.points = std::move(obj.vertices);
    if (!obj.normals.empty() && obj.normals.size() == cloud.points.size()) cloud.normals = std::move(obj.normals);
    validate(cloud);
    return cloud;
}

namespace {

void write_vec3_lines(std::ofstream& out, const char* prefix, const std::vector<Vec3>& values) {
    char buf[128];
    for (const auto& v : values) {
        std::snprintf(buf, sizeof buf, "%s %.9g %.9g %.9g\n", prefix, v.x(), v.y(), v.z());
        out << buf;
    }
}

}  // namespace

void write_obj(const std::string& path, const TriMesh& mesh) {
    validate(mesh);
    auto out = open_output(path);
    write_vec3_lines(out, "v", mesh.vertices);
    for (const auto& [a, b, c] : mesh.faces) out << "f " << a + 1 << ' ' << b + 1 << ' ' << c + 1 << '\n';
    if (!out) fail_io("failed writing '" + path + "'");
}

void write_obj(const std::string& path, const PointCloud& cloud) {
    validate(cloud);
    auto out = open_output(path);
    write_vec3_lines(out, "v", cloud.points);
    if (!out) fail_io("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// PLY
// ---------------------------------------------------------------------------

namespace {

struct PlyProperty {
    std::string name;
    int byte_size = 0;
    bool is_double = false;
};

int scalar_size(const std::string& type, const std::string& path, int line) {
    if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    if (type == "int" || type == "uint" || type == "int32" || type == "uint32" || type == "float" ||
        type == "float32")
        return 4;
    if (type == "double" || type == "float64") return 8;
    parse_fail(path, line, "unsupported property type '" + type + "'");
}

double extract_scalar(const char* data, const PlyProperty& prop) {
    if (prop.byte_size == 8) {
        double v;
        std::memcpy(&v, data, 8);
        return v;
    }
    float v;
    std::memcpy(&v, data, 4);
    return static_cast<double>(v);
}

}  // namespace

PointCloud read_ply(const std::string& path) {
    auto in = open_input(path, /*binary=*/true);
    std::string line;
    int lineno = 0;

    auto next_line = [&]() {
        if (!std::getline(in, line)) fail_io(path + ": unexpected end of header");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++lineno;
    };

    next_line();
    if (line != "ply") parse_fail(path, lineno, "not a PLY file");
    bool binary = false;
    bool in_vertex_element = false;
    long vertex_count = -1;
    std::vector<PlyProperty> vertex_props;
    bool saw_format = false;

    for (;;) {
        next_line();
        const auto tokens = split_ws(line);
        if (tokens.empty() || tokens[0] == "comment") continue;
        if (tokens[0] == "format") {
            if (tokens.size() < 2) parse_fail(path, lineno, "malformed format line");
            if (tokens[1] == "binary_big_endian")
                parse_fail(path, lineno, "big-endian PLY is not supported");
            if (tokens[1] == "binary_little_endian")
                binary = true;
            else if (tokens[1] != "ascii")
                parse_fail(path, lineno, "unknown PLY format '" + tokens[1] + "'");
            saw_format = true;
        } else if (tokens[0] == "element") {
            if (tokens.size() != 3) parse_fail(path, lineno, "malformed element line");
            in_vertex_element = tokens[1] == "vertex";
            if (in_vertex_element) vertex_count = std::strtol(tokens[2].c_str(), nullptr, 10);
            else if (vertex_count >= 0)
                break;  // properties of later elements are irrelevant; stop at end_header below
        } else if (tokens[0] == "property") {
            if (!in_vertex_element) continue;
            if (tokens.size() != 3 || tokens[1] == "list")
                parse_fail(path, lineno, "unsupported vertex property layout");
            PlyProperty prop;
            prop.byte_size = scalar_size(tokens[1], path, lineno);
            prop.is_double = prop.byte_size == 8 && (tokens[1] == "double" || tokens[1] == "float64");
            if (prop.byte_size < 4 && (tokens[2] == "x" || tokens[2] == "y" || tokens[2] == "z"))
                parse_fail(path, lineno, "coordinate properties must be float or double");
            prop.name = tokens[2];
            vertex_props.push_back(prop);
        } else if (tokens[0] == "end_header") {
            break;
        } else {
            parse_fail(path, lineno, "unsupported header record '" + tokens[0] + "'");
        }
    }
    if (!saw_format) fail_io(path + ": missing format line");
    if (vertex_count < 0) fail_io(path + ": missing vertex element");

    // If we broke out at a later element, skim forward to end_header.
    while (line != "end_header") next_line();

    int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
    for (size_t i = 0; i < vertex_props.size(); ++i) {
        const auto& n = vertex_props[i].name;
        if (n == "x") ix = static_cast<int>(i);
        else if (n == "y") iy = static_cast<int>(i);
        else if (n == "z") iz = static_cast<int>(i);
        else if (n == "nx") inx = static_cast<int>(i);
        else if (n == "ny") iny = static_cast<int>(i);
        else if (n == "nz") inz = static_cast<int>(i);
    }
    if (ix < 0 || iy < 0 || iz < 0) fail_io(path + ": vertex element lacks x/y/z properties");
    const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;

    PointCloud cloud;
    cloud.points.reserve(vertex_count);
    if (has_normals) cloud.normals.reserve(vertex_count);

    if (binary) {
        int stride = 0;
        std::vector<int> offsets(vertex_props.size());
        for (size_t i = 0; i < vertex_props.size(); ++i) {
            offsets[i] = stride;
            stride += vertex_props[i].byte_size;
        }
        std::vector<char> row(stride);
        for (long r = 0; r < vertex_count; ++r) {
            in.read(row.data(), stride);
            if (!in) fail_io(path + ": truncated binary vertex data at row " + std::to_string(r));
            auto get = [&](int prop) { return extract_scalar(row.data() + offsets[prop], vertex_props[prop]); };
            cloud.points.emplace_back(get(ix), get(iy), get(iz));
            if (has_normals) cloud.normals.emplace_back(get(inx), get(iny), get(inz));
        }
    } else {
        for (long r = 0; r < vertex_count; ++r) {
            next_line();
            const auto tokens = split_ws(line);
            if (tokens.size() < vertex_props.size())
                parse_fail(path, lineno, "vertex row has too few values");
            auto get = [&](int prop) { return parse_double(tokens[prop], path, lineno); };
            cloud.points.emplace_back(get(ix), get(iy), get(iz));
            if (has_normals) cloud.normals.emplace_back(get(inx), get(iny), get(inz));
        }
    }
    validate(cloud);
    return cloud;
}

void write_ply(const std::string& path, const PointCloud& cloud, bool binary) {
    validate(cloud);
    auto out = open_output(path, /*binary=*/true);
    out << "ply\n";
    out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
    out << "element vertex " << cloud.points.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (cloud.has_normals()) out << "property double nx\nproperty double ny\nproperty double nz\n";
    out << "end_header\n";
    if (binary) {
        for (size_t i = 0; i < cloud.points.size(); ++i) {
            double row[6];
            int n = 3;
            row[0] = cloud.points[i].x();
            row[1] = cloud.points[i].y();
            row[2] = cloud.points[i].z();
            if (cloud.has_normals()) {
                row[3] = cloud.normals[i].x();
                row[4] = cloud.normals[i].y();
                row[5] = cloud.normals[i].z();
                n = 6;
            }
            out.write(reinterpret_cast<const char*>(row), n * 8);
        }
    } else {
        char buf[256];
        for (size_t i = 0; i < cloud.points.size(); ++i) {
            const auto& p = cloud.points[i];
            if (cloud.has_normals()) {
                const auto& m = cloud.normals[i];
                std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g\n", p.x(), p.y(), p.z(), m.x(),
                              m.y(), m.z());
            } else {
                std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
            }
            out << buf;
        }
    }
    if (!out) fail_io("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Landmark and index files
// ---------------------------------------------------------------------------

LandmarkFile read_landmark_file(const std::string& path) {
    auto in = open_input(path);
    LandmarkFile file;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto tokens = split_ws(line);
        if (tokens.empty()) continue;
        LandmarkFile::Entry entry;
        entry.id = tokens[0];
        if (tokens.size() == 3 && tokens[1] == "i") {
            entry.is_index = true;
            entry.index = parse_int(tokens[2], path, lineno);
            if (entry.index < 0) parse_fail(path, lineno, "landmark vertex index must be non-negative");
        } else if (tokens.size() == 5 && tokens[1] == "p") {
            entry.position = Vec3(parse_double(tokens[2], path, lineno), parse_double(tokens[3], path, lineno),
                                  parse_double(tokens[4], path, lineno));
        } else {
            parse_fail(path, lineno, "expected '<id> p x y z' or '<id> i index'");
        }
        file.entries.push_back(std::move(entry));
    }
    return file;
}

void write_landmark_positions(const std::string& path, const LandmarkSet& set) {
    auto out = open_output(path);
    char buf[192];
    for (const auto& lm : set.landmarks) {
        std::snprintf(buf, sizeof buf, "%s p %.17g %.17g %.17g\n", lm.id.c_str(), lm.position.x(), lm.position.y(),
                      lm.position.z());
        out << buf;
    }
    if (!out) fail_io("failed writing '" + path + "'");
}

void write_landmark_indices(const std::string& path, const std::vector<std::pair<std::string, int>>& landmarks) {
    auto out = open_output(path);
    for (const auto& [id, idx] : landmarks) out << id << " i " << idx << "\n";
    if (!out) fail_io("failed writing '" + path + "'");
}

LandmarkSet resolve_landmarks(const LandmarkFile& file, const TriMesh* mesh) {
    LandmarkSet set;
    for (const auto& entry : file.entries) {
        Landmark lm;
        lm.id = entry.id;
        if (entry.is_index) {
            require_data(mesh != nullptr, "landmark '" + entry.id + "' uses index form but no mesh was provided");
            require_data(entry.index < mesh->vertex_count(),
                         "landmark '" + entry.id + "' index out of range for the mesh");
            lm.position = mesh->vertices[entry.index];
        } else {
            lm.position = entry.position;
        }
        set.landmarks.push_back(std::move(lm));
    }
    validate(set);
    return set;
}

std::vector<std::pair<std::string, int>> landmark_indices(const LandmarkFile& file) {
    std::vector<std::pair<std::string, int>> out;
    for (const auto& entry : file.entries) {
        require_data(entry.is_index, "landmark '" + entry.id + "' is not in index form");
        out.emplace_back(entry.id, entry.index);
    }
    return out;
}

std::vector<int> read_index_list(const std::string& path) {
    auto in = open_input(path);
    std::vector<int> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        out.push_back(parse_int(split_ws(line).at(0), path, lineno));
    }
    return out;
}

void write_index_list(const std::string& path, const std::vector<int>& indices) {
    auto out = open_output(path);
    for (int idx : indices) out << idx << "\n";
    if (!out) fail_io("failed writing '" + path + "'");
}

}  // namespace facecorr

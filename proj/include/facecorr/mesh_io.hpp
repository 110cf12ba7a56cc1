#pragma once

#include "facecorr/geometry.hpp"
#include "facecorr/preprocess.hpp"

#include <string>
#include <vector>

namespace facecorr {

/// Raw OBJ contents: v / vn / f records only, triangles only, 1-based
/// indices. Anything else is a parse error carrying the line number.
struct ObjContents {
    std::vector<Vec3> vertices;
    std::vector<Vec3> normals;
    std::vector<std::array<int, 3>> faces;
};

ObjContents read_obj(const std::string& path);
TriMesh read_obj_mesh(const std::string& path);       // requires faces
PointCloud read_obj_cloud(const std::string& path);   // requires no faces

void write_obj(const std::string& path, const TriMesh& mesh);
void write_obj(const std::string& path, const PointCloud& cloud);  // v lines only

/// PLY point clouds: ascii or binary_little_endian, vertex element with
/// x, y, z (float or double), optionally nx, ny, nz. Binary output stores
/// doubles, so a round trip is bit-exact.
PointCloud read_ply(const std::string& path);
void write_ply(const std::string& path, const PointCloud& cloud, bool binary = true);

/// Landmark file: one record per line,
///   <id> p <x> <y> <z>   position form (raw scans)
///   <id> i <vertex>      index form (templates)
struct LandmarkFile {
    struct Entry {
        std::string id;
        bool is_index = false;
        int index = -1;
        Vec3 position = Vec3::Zero();
    };
    std::vector<Entry> entries;
};

LandmarkFile read_landmark_file(const std::string& path);
void write_landmark_positions(const std::string& path, const LandmarkSet& set);
void write_landmark_indices(const std::string& path, const std::vector<std::pair<std::string, int>>& landmarks);

/// Resolve a landmark file to positions; index entries require a mesh.
LandmarkSet resolve_landmarks(const LandmarkFile& file, const TriMesh* mesh);
/// Index entries only (template form).
std::vector<std::pair<std::string, int>> landmark_indices(const LandmarkFile& file);

/// Plain list of vertex indices, one per line.
std::vector<int> read_index_list(const std::string& path);
void write_index_list(const std::string& path, const std::vector<int>& indices);

}  // namespace facecorr

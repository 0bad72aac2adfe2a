#include "gentract/tract/augment.hpp"

#include <stdexcept>
#include <vector>

#include "gentract/nd/parallel.hpp"

namespace gentract::tract {

Axis axis_from_char(char c) {
    switch (c) {
        case 'x': case 'X': return Axis::X;
        case 'y': case 'Y': return Axis::Y;
        case 'z': case 'Z': return Axis::Z;
        default: throw std::invalid_argument(std::string("unknown rotation axis '") + c + "'");
    }
}

std::pair<sh::SHVolume, Tractogram> rotate_pair(const sh::SHVolume& v, const Tractogram& t,
                                                double angle_rad, Axis axis) {
    Vec3 u = {0, 0, 0};
    u[static_cast<int>(axis)] = 1.0;
    const Mat3 rot = rotation_about(u, angle_rad);
    const Mat3 rot_inv = mat3_transpose(rot);
    const Vec3 center = v.world_center();

    Tractogram out_t = t;
    for (Streamline& s : out_t.streamlines)
        for (Vec3& p : s) p = mat3_apply(rot, p - center) + center;

    sh::SHVolume out_v = v;
    const int m = v.m();
    const std::vector<double> reorient = sh::sh_rotation_operator(v.l_max, rot);
    const Affine to_index = affine_inverse(v.affine);
    nd::parallel_for(v.voxel_count(), [&](std::int64_t lo, std::int64_t hi) {
        std::vector<double> sampled(static_cast<std::size_t>(m));
        for (std::int64_t vox = lo; vox < hi; ++vox) {
            const int i = static_cast<int>(vox / (static_cast<std::int64_t>(v.w) * v.d));
            const int j = static_cast<int>((vox / v.d) % v.w);
            const int k = static_cast<int>(vox % v.d);
            const Vec3 world = v.index_to_world({double(i), double(j), double(k)});
            const Vec3 src_world = mat3_apply(rot_inv, world - center) + center;
            v.sample_index(affine_apply(to_index, src_world), sampled.data());
            double* dst = out_v.data.data() + vox * m;
            for (int r = 0; r < m; ++r) {
                double acc = 0.0;
                for (int c = 0; c < m; ++c)
                    acc += reorient[static_cast<std::size_t>(r) * m + c] * sampled[static_cast<std::size_t>(c)];
                dst[r] = acc;
            }
        }
    });
    return {std::move(out_v), std::move(out_t)};
}

}  // namespace gentract::tract

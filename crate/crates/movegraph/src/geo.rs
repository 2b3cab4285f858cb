//! Geodetic primitives for virtual-gate detection.
//!
//! Distances use the haversine formula on a sphere of radius
//! [`EARTH_RADIUS_M`]. For gate intersection tests, coordinates are first
//! projected onto a local tangent plane with a simple equirectangular
//! projection, which is accurate for the short distances involved here
//! (the projection refuses to work beyond [`MAX_PROJECTION_DISTANCE_M`]).
//! Everything in this module is a pure function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::GeoPoint;

/// Mean Earth radius in meters (IUGG).
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Beyond this separation the flat-plane approximation is refused.
pub const MAX_PROJECTION_DISTANCE_M: f64 = 50_000.0;

/// A point on the local tangent plane: meters east (`x`) and north (`y`)
/// of the projection origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub fn new(x: f64, y: f64) -> Self {
        PlanarPoint { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// A trajectory step (`a1 -> a2`) paired with a gate segment (`b1 -> b2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentPair {
    pub a1: PlanarPoint,
    pub a2: PlanarPoint,
    pub b1: PlanarPoint,
    pub b2: PlanarPoint,
}

/// Where two closed segments meet: the point, and the fraction `u` of the
/// way from `a1` to `a2` at which it lies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intersection {
    pub point: PlanarPoint,
    pub u: f64,
}

/// Great-circle distance in meters between two coordinates.
pub fn haversine_distance(p: GeoPoint, q: GeoPoint) -> f64 {
    let phi1 = p.lat.to_radians();
    let phi2 = q.lat.to_radians();
    let dphi = phi2 - phi1;
    let dlambda = (q.lon - p.lon).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

/// Equirectangular projection of `p` onto the tangent plane at `origin`:
/// `x = R * dlon * cos(lat_origin)`, `y = R * dlat` (angles in radians).
/// The origin maps to (0, 0). Only valid for small separations; the
/// distance bound is enforced.
pub fn project_local(origin: GeoPoint, p: GeoPoint) -> Result<PlanarPoint> {
    let d = haversine_distance(origin, p);
    if d >= MAX_PROJECTION_DISTANCE_M {
        return Err(Error::ProjectionRangeExceeded {
            distance_m: d,
            limit_m: MAX_PROJECTION_DISTANCE_M,
        });
    }
    // wrap the longitude difference so points straddling the antimeridian
    // still project onto one plane
    let mut dlon = p.lon - origin.lon;
    if dlon > 180.0 {
        dlon -= 360.0;
    } else if dlon < -180.0 {
        dlon += 360.0;
    }
    let x = EARTH_RADIUS_M * dlon.to_radians() * origin.lat.to_radians().cos();
    let y = EARTH_RADIUS_M * (p.lat - origin.lat).to_radians();
    Ok(PlanarPoint { x, y })
}

/// Inverse of [`project_local`] at the same origin.
pub fn unproject_local(origin: GeoPoint, p: PlanarPoint) -> Result<GeoPoint> {
    let lat = origin.lat + (p.y / EARTH_RADIUS_M).to_degrees();
    let lon = origin.lon + (p.x / (EARTH_RADIUS_M * origin.lat.to_radians().cos())).to_degrees();
    GeoPoint::new(lat, lon)
}

fn cross(ox: f64, oy: f64, ax: f64, ay: f64) -> f64 {
    ox * ay - oy * ax
}

/// Intersection of the closed segments `a1a2` and `b1b2`, if any.
///
/// Endpoint touches count as intersections. When the segments are collinear
/// and overlap, the earliest overlapping point along `a1 -> a2` (smallest
/// `u`) is returned. Degenerate zero-length segments never intersect.
pub fn segment_intersection(sp: &SegmentPair) -> Option<Intersection> {
    let dax = sp.a2.x - sp.a1.x;
    let day = sp.a2.y - sp.a1.y;
    let dbx = sp.b2.x - sp.b1.x;
    let dby = sp.b2.y - sp.b1.y;
    if (dax == 0.0 && day == 0.0) || (dbx == 0.0 && dby == 0.0) {
        return None;
    }

    let qpx = sp.b1.x - sp.a1.x;
    let qpy = sp.b1.y - sp.a1.y;
    let denom = cross(dax, day, dbx, dby);

    if denom != 0.0 {
        let u = cross(qpx, qpy, dbx, dby) / denom;
        let v = cross(qpx, qpy, dax, day) / denom;
        if (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v) {
            return Some(Intersection {
                point: PlanarPoint {
                    x: sp.a1.x + u * dax,
                    y: sp.a1.y + u * day,
                },
                u,
            });
        }
        return None;
    }

    // parallel: overlap only if collinear
    if cross(qpx, qpy, dax, day) != 0.0 {
        return None;
    }
    let len2 = dax * dax + day * day;
    let tb1 = (qpx * dax + qpy * day) / len2;
    let tb2 = ((sp.b2.x - sp.a1.x) * dax + (sp.b2.y - sp.a1.y) * day) / len2;
    let lo = tb1.min(tb2).max(0.0);
    let hi = tb1.max(tb2).min(1.0);
    if lo > hi {
        return None;
    }
    Some(Intersection {
        point: PlanarPoint {
            x: sp.a1.x + lo * dax,
            y: sp.a1.y + lo * day,
        },
        u: lo,
    })
}

/// Signed side of point `p` relative to the directed line `b1 -> b2`:
/// positive on the left, negative on the right, zero on the line.
pub fn side_of_line(b1: PlanarPoint, b2: PlanarPoint, p: PlanarPoint) -> f64 {
    cross(b2.x - b1.x, b2.y - b1.y, p.x - b1.x, p.y - b1.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gp(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn haversine_identity_is_zero() {
        let p = gp(48.2, 16.3);
        assert_eq!(haversine_distance(p, p), 0.0);
    }

    #[test]
    fn haversine_antipodal_on_equator_is_half_circumference() {
        let d = haversine_distance(gp(0.0, 0.0), gp(0.0, 180.0));
        let half = std::f64::consts::PI * EARTH_RADIUS_M;
        assert!((d - half).abs() < 1.0, "got {d}, want {half}");
    }

    #[test]
    fn haversine_matches_ellipsoidal_reference() {
        // Vincenty inverse on WGS84 for (48.2,16.3) -> (48.2,16.301),
        // computed with an independent implementation: 74.336461 m.
        let reference_m = 74.336461;
        let d = haversine_distance(gp(48.2, 16.3), gp(48.2, 16.301));
        let rel = (d - reference_m).abs() / reference_m;
        assert!(rel < 0.005, "relative error {rel} vs reference {reference_m}");
    }

    #[test]
    fn haversine_symmetry_and_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            // one hemisphere, away from the poles
            let pt = |rng: &mut ChaCha8Rng| {
                gp(rng.gen_range(-80.0..80.0), rng.gen_range(0.0..180.0))
            };
            let (a, b, c) = (pt(&mut rng), pt(&mut rng), pt(&mut rng));
            let ab = haversine_distance(a, b);
            let ba = haversine_distance(b, a);
            assert!((ab - ba).abs() < 1e-9 * ab.max(1.0));
            let bc = haversine_distance(b, c);
            let ac = haversine_distance(a, c);
            assert!(ac <= ab + bc + 1e-6);
        }
    }

    #[test]
    fn projection_maps_origin_to_zero() {
        let o = gp(47.0, 15.0);
        let p = project_local(o, o).unwrap();
        assert_eq!((p.x, p.y), (0.0, 0.0));
    }

    #[test]
    fn projection_due_north_has_zero_easting() {
        let o = gp(47.0, 15.0);
        let p = project_local(o, gp(47.01, 15.0)).unwrap();
        assert_eq!(p.x, 0.0);
        assert!(p.y > 0.0);
    }

    #[test]
    fn projection_preserves_haversine_within_a_kilometer() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let o = gp(47.0, 15.0);
        for _ in 0..500 {
            let p = gp(
                47.0 + rng.gen_range(-0.008..0.008),
                15.0 + rng.gen_range(-0.012..0.012),
            );
            let d = haversine_distance(o, p);
            if d < 1.0 {
                continue;
            }
            let planar = project_local(o, p).unwrap().norm();
            let rel = (planar - d).abs() / d;
            assert!(rel < 0.001, "rel err {rel} at distance {d}");
        }
    }

    #[test]
    fn projection_rejects_distant_points() {
        let o = gp(47.0, 15.0);
        assert!(matches!(
            project_local(o, gp(48.0, 15.0)),
            Err(Error::ProjectionRangeExceeded { .. })
        ));
    }

    #[test]
    fn unproject_round_trips() {
        let o = gp(47.0, 15.0);
        let p = gp(47.003, 15.004);
        let back = unproject_local(o, project_local(o, p).unwrap()).unwrap();
        assert!((back.lat - p.lat).abs() < 1e-12);
        assert!((back.lon - p.lon).abs() < 1e-12);
    }

    fn pp(x: f64, y: f64) -> PlanarPoint {
        PlanarPoint::new(x, y)
    }

    #[test]
    fn symmetric_x_crossing() {
        let hit = segment_intersection(&SegmentPair {
            a1: pp(0.0, 0.0),
            a2: pp(2.0, 2.0),
            b1: pp(0.0, 2.0),
            b2: pp(2.0, 0.0),
        })
        .unwrap();
        assert_eq!((hit.point.x, hit.point.y), (1.0, 1.0));
        assert_eq!(hit.u, 0.5);
    }

    #[test]
    fn disjoint_segments_do_not_intersect() {
        assert!(segment_intersection(&SegmentPair {
            a1: pp(0.0, 0.0),
            a2: pp(1.0, 0.0),
            b1: pp(2.0, 1.0),
            b2: pp(2.0, -1.0),
        })
        .is_none());
    }

    #[test]
    fn touching_endpoint_counts() {
        let hit = segment_intersection(&SegmentPair {
            a1: pp(0.0, 0.0),
            a2: pp(1.0, 0.0),
            b1: pp(1.0, -1.0),
            b2: pp(1.0, 1.0),
        })
        .unwrap();
        assert_eq!(hit.u, 1.0);
    }

    #[test]
    fn collinear_overlap_returns_earliest_point() {
        let hit = segment_intersection(&SegmentPair {
            a1: pp(0.0, 0.0),
            a2: pp(4.0, 0.0),
            b1: pp(3.0, 0.0),
            b2: pp(1.0, 0.0),
        })
        .unwrap();
        assert_eq!(hit.u, 0.25);
        assert_eq!(hit.point, pp(1.0, 0.0));
    }

    #[test]
    fn degenerate_segments_never_intersect() {
        assert!(segment_intersection(&SegmentPair {
            a1: pp(1.0, 1.0),
            a2: pp(1.0, 1.0),
            b1: pp(0.0, 0.0),
            b2: pp(2.0, 2.0),
        })
        .is_none());
    }

    // Independent oracle: orientation tests plus on-segment checks, the
    // classical computational-geometry predicate route.
    fn oracle_intersects(sp: &SegmentPair) -> bool {
        fn orient(p: PlanarPoint, q: PlanarPoint, r: PlanarPoint) -> f64 {
            (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)
        }
        fn on_segment(p: PlanarPoint, q: PlanarPoint, r: PlanarPoint) -> bool {
            orient(p, q, r) == 0.0
                && r.x >= p.x.min(q.x)
                && r.x <= p.x.max(q.x)
                && r.y >= p.y.min(q.y)
                && r.y <= p.y.max(q.y)
        }
        let o1 = orient(sp.a1, sp.a2, sp.b1);
        let o2 = orient(sp.a1, sp.a2, sp.b2);
        let o3 = orient(sp.b1, sp.b2, sp.a1);
        let o4 = orient(sp.b1, sp.b2, sp.a2);
        if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
            return true;
        }
        (o1 == 0.0 && on_segment(sp.a1, sp.a2, sp.b1))
            || (o2 == 0.0 && on_segment(sp.a1, sp.a2, sp.b2))
            || (o3 == 0.0 && on_segment(sp.b1, sp.b2, sp.a1))
            || (o4 == 0.0 && on_segment(sp.b1, sp.b2, sp.a2))
    }

    #[test]
    fn thousand_random_pairs_match_orientation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_501);
        for i in 0..1000 {
            let mut p = || pp(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            let sp = SegmentPair {
                a1: p(),
                a2: p(),
                b1: p(),
                b2: p(),
            };
            let got = segment_intersection(&sp);
            assert_eq!(
                got.is_some(),
                oracle_intersects(&sp),
                "disagreement on pair {i}: {sp:?}"
            );
            if let Some(hit) = got {
                // the reported point must reproduce from u exactly
                let rx = sp.a1.x + hit.u * (sp.a2.x - sp.a1.x);
                let ry = sp.a1.y + hit.u * (sp.a2.y - sp.a1.y);
                assert!((rx - hit.point.x).abs() < 1e-9);
                assert!((ry - hit.point.y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn intersection_symmetric_under_segment_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            let mut p = || pp(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let sp = SegmentPair {
                a1: p(),
                a2: p(),
                b1: p(),
                b2: p(),
            };
            let swapped = SegmentPair {
                a1: sp.b1,
                a2: sp.b2,
                b1: sp.a1,
                b2: sp.a2,
            };
            let x = segment_intersection(&sp);
            let y = segment_intersection(&swapped);
            assert_eq!(x.is_some(), y.is_some());
            if let (Some(h1), Some(h2)) = (x, y) {
                assert!((h1.point.x - h2.point.x).abs() < 1e-9);
                assert!((h1.point.y - h2.point.y).abs() < 1e-9);
            }
        }
    }
}

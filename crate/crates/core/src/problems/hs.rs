//! Small analytic problems from the Hock–Schittkowski and related collections.

use nalgebra::{DMatrix, DVector};

use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HsKind {
    Maratos,
    Hs39,
    Hs40,
    Hs42,
    Hs78,
    Hs79,
    Bt5,
}

impl HsKind {
    pub const ALL: [HsKind; 7] = [
        HsKind::Maratos,
        HsKind::Hs39,
        HsKind::Hs40,
        HsKind::Hs42,
        HsKind::Hs78,
        HsKind::Hs79,
        HsKind::Bt5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HsKind::Maratos => "MARATOS",
            HsKind::Hs39 => "HS39",
            HsKind::Hs40 => "HS40",
            HsKind::Hs42 => "HS42",
            HsKind::Hs78 => "HS78",
            HsKind::Hs79 => "HS79",
            HsKind::Bt5 => "BT5",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HsProblem {
    kind: HsKind,
}

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn jac(rows: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, v.len() / rows, v)
}

impl HsProblem {
    pub fn new(kind: HsKind) -> Self {
        Self { kind }
    }

    pub fn kind(&self) -> HsKind {
        self.kind
    }

    /// Documented local solution (the one reached from the standard start).
    pub fn known_solution(&self) -> DVector<f64> {
        let s2 = std::f64::consts::SQRT_2;
        match self.kind {
            HsKind::Maratos => dv(&[1.0, 0.0]),
            HsKind::Hs39 => dv(&[1.0, 1.0, 0.0, 0.0]),
            HsKind::Hs40 => dv(&[
                2f64.powf(-1.0 / 3.0),
                2f64.powf(-0.5),
                2f64.powf(-11.0 / 12.0),
                2f64.powf(-0.25),
            ]),
            HsKind::Hs42 => dv(&[2.0, 2.0, 0.6 * s2, 0.8 * s2]),
            HsKind::Hs78 => dv(&[
                -1.717_143_570_394_382_3,
                1.595_709_690_183_554_4,
                1.827_245_752_927_194_6,
                -0.763_643_078_184_130_4,
                -0.763_643_078_184_130_4,
            ]),
            HsKind::Hs79 => dv(&[
                1.191_127_456_311_051_4,
                1.362_603_164_961_742_1,
                1.472_817_931_512_087_7,
                1.635_016_619_167_992_7,
                1.679_081_436_166_407_6,
            ]),
            HsKind::Bt5 => dv(&[
                3.512_121_341_874_719_9,
                0.216_987_941_515_223_03,
                3.552_171_154_827_017,
            ]),
        }
    }

    /// Objective value at [`HsProblem::known_solution`].
    pub fn known_optimum(&self) -> f64 {
        match self.kind {
            HsKind::Maratos => -1.0,
            HsKind::Hs39 => -1.0,
            HsKind::Hs40 => -0.25,
            HsKind::Hs42 => 28.0 - 10.0 * std::f64::consts::SQRT_2,
            HsKind::Hs78 => -2.919_700_408_963_679_4,
            HsKind::Hs79 => 0.078_776_820_871_056_9,
            HsKind::Bt5 => 961.715_172_130_052_2,
        }
    }
}

impl Problem for HsProblem {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn dim_x(&self) -> usize {
        match self.kind {
            HsKind::Maratos => 2,
            HsKind::Bt5 => 3,
            HsKind::Hs39 | HsKind::Hs40 | HsKind::Hs42 => 4,
            HsKind::Hs78 | HsKind::Hs79 => 5,
        }
    }

    fn dim_c(&self) -> usize {
        match self.kind {
            HsKind::Maratos => 1,
            HsKind::Hs39 | HsKind::Hs42 | HsKind::Bt5 => 2,
            HsKind::Hs40 | HsKind::Hs78 | HsKind::Hs79 => 3,
        }
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        match self.kind {
            HsKind::Maratos => 2.0 * (x[0] * x[0] + x[1] * x[1] - 1.0) - x[0],
            HsKind::Hs39 => -x[0],
            HsKind::Hs40 => -x[0] * x[1] * x[2] * x[3],
            HsKind::Hs42 => (0..4).map(|i| (x[i] - (i + 1) as f64).powi(2)).sum(),
            HsKind::Hs78 => x.iter().product(),
            HsKind::Hs79 => {
                (x[0] - 1.0).powi(2)
                    + (x[0] - x[1]).powi(2)
                    + (x[1] - x[2]).powi(2)
                    + (x[2] - x[3]).powi(4)
                    + (x[3] - x[4]).powi(4)
            }
            HsKind::Bt5 => {
                1000.0 - x[0] * x[0] - 2.0 * x[1] * x[1] - x[2] * x[2] - x[0] * x[1] - x[0] * x[2]
            }
        }
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            HsKind::Maratos => dv(&[4.0 * x[0] - 1.0, 4.0 * x[1]]),
            HsKind::Hs39 => dv(&[-1.0, 0.0, 0.0, 0.0]),
            HsKind::Hs40 => dv(&[
                -x[1] * x[2] * x[3],
                -x[0] * x[2] * x[3],
                -x[0] * x[1] * x[3],
                -x[0] * x[1] * x[2],
            ]),
            HsKind::Hs42 => DVector::from_fn(4, |i, _| 2.0 * (x[i] - (i + 1) as f64)),
            HsKind::Hs78 => DVector::from_fn(5, |i, _| {
                (0..5).filter(|&j| j != i).map(|j| x[j]).product()
            }),
            HsKind::Hs79 => {
                let d34 = (x[2] - x[3]).powi(3);
                let d45 = (x[3] - x[4]).powi(3);
                dv(&[
                    2.0 * (x[0] - 1.0) + 2.0 * (x[0] - x[1]),
                    -2.0 * (x[0] - x[1]) + 2.0 * (x[1] - x[2]),
                    -2.0 * (x[1] - x[2]) + 4.0 * d34,
                    -4.0 * d34 + 4.0 * d45,
                    -4.0 * d45,
                ])
            }
            HsKind::Bt5 => dv(&[
                -2.0 * x[0] - x[1] - x[2],
                -4.0 * x[1] - x[0],
                -2.0 * x[2] - x[0],
            ]),
        }
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let d = self.dim_x();
        Some(match self.kind {
            HsKind::Maratos => DMatrix::identity(2, 2) * 4.0,
            HsKind::Hs39 => DMatrix::zeros(4, 4),
            HsKind::Hs40 => DMatrix::from_fn(4, 4, |i, j| {
                if i == j {
                    0.0
                } else {
                    -(0..4).filter(|&k| k != i && k != j).map(|k| x[k]).product::<f64>()
                }
            }),
            HsKind::Hs42 => DMatrix::identity(4, 4) * 2.0,
            HsKind::Hs78 => DMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    0.0
                } else {
                    (0..5).filter(|&k| k != i && k != j).map(|k| x[k]).product::<f64>()
                }
            }),
            HsKind::Hs79 => {
                let a = 12.0 * (x[2] - x[3]).powi(2);
                let b = 12.0 * (x[3] - x[4]).powi(2);
                jac(
                    5,
                    &[
                        4.0, -2.0, 0.0, 0.0, 0.0, //
                        -2.0, 4.0, -2.0, 0.0, 0.0, //
                        0.0, -2.0, 2.0 + a, -a, 0.0, //
                        0.0, 0.0, -a, a + b, -b, //
                        0.0, 0.0, 0.0, -b, b,
                    ],
                )
            }
            HsKind::Bt5 => jac(3, &[-2.0, -1.0, -1.0, -1.0, -4.0, 0.0, -1.0, 0.0, -2.0]),
        })
    }

    fn constraints(&self, x: &DVector<f64>) -> DVector<f64> {
        let s2 = std::f64::consts::SQRT_2;
        match self.kind {
            HsKind::Maratos => dv(&[x[0] * x[0] + x[1] * x[1] - 1.0]),
            HsKind::Hs39 => dv(&[
                x[1] - x[0].powi(3) - x[2] * x[2],
                x[0] * x[0] - x[1] - x[3] * x[3],
            ]),
            HsKind::Hs40 => dv(&[
                x[0].powi(3) + x[1] * x[1] - 1.0,
                x[0] * x[0] * x[3] - x[2],
                x[3] * x[3] - x[1],
            ]),
            HsKind::Hs42 => dv(&[x[0] - 2.0, x[2] * x[2] + x[3] * x[3] - 2.0]),
            HsKind::Hs78 => dv(&[
                x.norm_squared() - 10.0,
                x[1] * x[2] - 5.0 * x[3] * x[4],
                x[0].powi(3) + x[1].powi(3) + 1.0,
            ]),
            HsKind::Hs79 => dv(&[
                x[0] + x[1] * x[1] + x[2].powi(3) - 2.0 - 3.0 * s2,
                x[1] - x[2] * x[2] + x[3] + 2.0 - 2.0 * s2,
                x[0] * x[4] - 2.0,
            ]),
            HsKind::Bt5 => dv(&[
                x.norm_squared() - 25.0,
                8.0 * x[0] + 14.0 * x[1] + 7.0 * x[2] - 56.0,
            ]),
        }
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self.kind {
            HsKind::Maratos => jac(1, &[2.0 * x[0], 2.0 * x[1]]),
            HsKind::Hs39 => jac(
                2,
                &[
                    -3.0 * x[0] * x[0], 1.0, -2.0 * x[2], 0.0, //
                    2.0 * x[0], -1.0, 0.0, -2.0 * x[3],
                ],
            ),
            HsKind::Hs40 => jac(
                3,
                &[
                    3.0 * x[0] * x[0], 2.0 * x[1], 0.0, 0.0, //
                    2.0 * x[0] * x[3], 0.0, -1.0, x[0] * x[0], //
                    0.0, -1.0, 0.0, 2.0 * x[3],
                ],
            ),
            HsKind::Hs42 => jac(2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0 * x[2], 2.0 * x[3]]),
            HsKind::Hs78 => jac(
                3,
                &[
                    2.0 * x[0], 2.0 * x[1], 2.0 * x[2], 2.0 * x[3], 2.0 * x[4], //
                    0.0, x[2], x[1], -5.0 * x[4], -5.0 * x[3], //
                    3.0 * x[0] * x[0], 3.0 * x[1] * x[1], 0.0, 0.0, 0.0,
                ],
            ),
            HsKind::Hs79 => jac(
                3,
                &[
                    1.0, 2.0 * x[1], 3.0 * x[2] * x[2], 0.0, 0.0, //
                    0.0, 1.0, -2.0 * x[2], 1.0, 0.0, //
                    x[4], 0.0, 0.0, 0.0, x[0],
                ],
            ),
            HsKind::Bt5 => jac(2, &[2.0 * x[0], 2.0 * x[1], 2.0 * x[2], 8.0, 14.0, 7.0]),
        }
    }

    fn constraint_hessians(&self, x: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        let d = self.dim_x();
        let z = || DMatrix::<f64>::zeros(d, d);
        let diag = |v: &[f64]| DMatrix::from_diagonal(&dv(v));
        Some(match self.kind {
            HsKind::Maratos => vec![DMatrix::identity(2, 2) * 2.0],
            HsKind::Hs39 => vec![
                diag(&[-6.0 * x[0], 0.0, -2.0, 0.0]),
                diag(&[2.0, 0.0, 0.0, -2.0]),
            ],
            HsKind::Hs40 => {
                let mut h2 = diag(&[2.0 * x[3], 0.0, 0.0, 0.0]);
                h2[(0, 3)] = 2.0 * x[0];
                h2[(3, 0)] = 2.0 * x[0];
                vec![
                    diag(&[6.0 * x[0], 2.0, 0.0, 0.0]),
                    h2,
                    diag(&[0.0, 0.0, 0.0, 2.0]),
                ]
            }
            HsKind::Hs42 => vec![z(), diag(&[0.0, 0.0, 2.0, 2.0])],
            HsKind::Hs78 => {
                let mut h2 = z();
                h2[(1, 2)] = 1.0;
                h2[(2, 1)] = 1.0;
                h2[(3, 4)] = -5.0;
                h2[(4, 3)] = -5.0;
                vec![
                    DMatrix::identity(5, 5) * 2.0,
                    h2,
                    diag(&[6.0 * x[0], 6.0 * x[1], 0.0, 0.0, 0.0]),
                ]
            }
            HsKind::Hs79 => {
                let mut h3 = z();
                h3[(0, 4)] = 1.0;
                h3[(4, 0)] = 1.0;
                vec![
                    diag(&[0.0, 2.0, 6.0 * x[2], 0.0, 0.0]),
                    diag(&[0.0, 0.0, -2.0, 0.0, 0.0]),
                    h3,
                ]
            }
            HsKind::Bt5 => vec![DMatrix::identity(3, 3) * 2.0, z()],
        })
    }

    fn initial_point(&self) -> DVector<f64> {
        match self.kind {
            HsKind::Maratos => dv(&[1.1, 0.1]),
            HsKind::Hs39 => DVector::from_element(4, 2.0),
            HsKind::Hs40 => DVector::from_element(4, 0.8),
            HsKind::Hs42 => DVector::from_element(4, 1.0),
            HsKind::Hs78 => dv(&[-2.0, 1.5, 2.0, -1.0, -1.0]),
            HsKind::Hs79 => DVector::from_element(5, 2.0),
            HsKind::Bt5 => DVector::from_element(3, 2.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::factorize;
    use crate::problem::{eval_kkt, fd_step, finite_diff_grad, finite_diff_jacobian, finite_diff_vector_field, validate};

    fn probes(p: &HsProblem) -> Vec<DVector<f64>> {
        let x0 = p.initial_point();
        let d = x0.len();
        vec![
            x0.clone(),
            p.known_solution(),
            DVector::from_fn(d, |i, _| 0.3 + 0.17 * i as f64 - 0.05 * (i * i) as f64),
        ]
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for kind in HsKind::ALL {
            let p = HsProblem::new(kind);
            validate(&p).unwrap();
            for x in probes(&p) {
                let h = fd_step(&x);
                let scale = 1.0 + p.gradient(&x).amax();
                assert!((finite_diff_grad(&p, &x, h) - p.gradient(&x)).amax() <= 1e-6 * scale, "{kind:?} grad");
                let jscale = 1.0 + p.jacobian(&x).amax();
                assert!((finite_diff_jacobian(&p, &x, h) - p.jacobian(&x)).amax() <= 1e-6 * jscale, "{kind:?} jac");
                let hess = p.hessian(&x).unwrap();
                let fd = finite_diff_vector_field(|y| p.gradient(y), &x, h);
                assert!((fd - &hess).amax() <= 1e-5 * (1.0 + hess.amax()), "{kind:?} hess");
                assert_eq!(&hess, &hess.transpose());
                for (i, hc) in p.constraint_hessians(&x).unwrap().iter().enumerate() {
                    let fd = finite_diff_vector_field(|y| p.jacobian(y).row(i).transpose(), &x, h);
                    assert!((fd - hc).amax() <= 1e-5 * (1.0 + hc.amax()), "{kind:?} c{i} hess");
                }
            }
        }
    }

    #[test]
    fn documented_optimum_is_kkt_point() {
        for kind in HsKind::ALL {
            let p = HsProblem::new(kind);
            let x = p.known_solution();
            let g = p.gradient(&x);
            let lambda = factorize(p.jacobian(&x)).unwrap().ls_multiplier(&g);
            let r = eval_kkt(&p, &x, &g, &lambda).unwrap();
            assert!(r.total <= 1e-8, "{kind:?}: {}", r.total);
            assert!((p.objective(&x) - p.known_optimum()).abs() <= 1e-10 * (1.0 + p.known_optimum().abs()));
        }
    }

    #[test]
    fn maratos_multiplier() {
        let p = HsProblem::new(HsKind::Maratos);
        let x = p.known_solution();
        let lambda = DVector::from_element(1, -1.5);
        let r = eval_kkt(&p, &x, &p.gradient(&x), &lambda).unwrap();
        assert!(r.total <= 1e-10);
        assert_eq!(p.objective(&x), -1.0);
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(HsKind::from_name("hs40"), Some(HsKind::Hs40));
        assert_eq!(HsKind::from_name("BT9"), None);
    }
}

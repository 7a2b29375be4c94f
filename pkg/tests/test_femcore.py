import warnings

import numpy as np
import pytest
import sympy as sp

from vwbeam.distmodel import Constant, Dirac, Smooth, expr
from vwbeam.femcore import (BAND, BandedMatrix, QuadratureSpec, ResolutionWarning, assemble,
                            build_space, element_matrices, eval_solution, hermite_interpolant,
                            l2_projection, point_load, project_initial, shape_functions)
from vwbeam.mollify import MollifierNet, mollify_expr, separable_mollify_2d

X = sp.symbols("x")


def sympy_basis(x0, h):
    xi = (X - x0) / h
    return [1 - 3 * xi**2 + 2 * xi**3, h * (xi - 2 * xi**2 + xi**3), 3 * xi**2 - 2 * xi**3,
            h * (xi**3 - xi**2)]


def sympy_element(coef, x0, h, kind):
    N = sympy_basis(x0, h)
    d = {"mass": (0, 0), "slope": (1, 1), "bending": (2, 2), "axial": (0, 2)}[kind]
    out = np.empty((4, 4))
    for a in range(4):
        for b in range(4):
            f = coef * sp.diff(N[a], X, d[0]) * sp.diff(N[b], X, d[1])
            out[a, b] = float(sp.integrate(f, (X, x0, x0 + h)))
    return out


def dense_from_elements(mesh, ke):
    full = np.zeros((mesh.dof_count, mesh.dof_count))
    for e in range(mesh.n):
        full[2 * e:2 * e + 4, 2 * e:2 * e + 4] += ke[e]
    return full[2:-2, 2:-2]


def unit_fields(c_expr=None, g=None, eps=None):
    net = MollifierNet(eps) if eps else None
    c = mollify_expr(c_expr or expr(Constant(1.0)), net)
    b = separable_mollify_2d(expr(Constant(0.0), arity="xt"), net)
    g = separable_mollify_2d(g or expr(Constant(0.0), arity="xt"), net)
    return c, b, g


class TestShapeFunctions:
    def test_nodal_values(self):
        N, dN, _ = shape_functions(np.array([0.0, 1.0]), 0.25)
        np.testing.assert_allclose(N, [[1, 0, 0, 0], [0, 0, 1, 0]], atol=1e-15)
        np.testing.assert_allclose(dN, [[0, 1, 0, 0], [0, 0, 0, 1]], atol=1e-14)

    def test_partition_of_unity(self):
        xi = np.linspace(0, 1, 17)
        N, dN, d2N = shape_functions(xi, 0.1)
        np.testing.assert_allclose(N[:, 0] + N[:, 2], 1.0)
        np.testing.assert_allclose(dN[:, 0] + dN[:, 2], 0.0, atol=1e-12)

    def test_against_sympy(self):
        h, x0 = 0.2, 0.4
        basis = sympy_basis(x0, h)
        xi = np.array([0.1, 0.37, 0.8])
        got = shape_functions(xi, h)
        for d in range(3):
            for a in range(4):
                f = sp.lambdify(X, sp.diff(basis[a], X, d))
                np.testing.assert_allclose(got[d][:, a], [f(x0 + h * s) for s in xi],
                                           rtol=1e-12, atol=1e-12)


class TestElementMatrices:
    @pytest.mark.parametrize("kind", ["mass", "slope", "bending", "axial"])
    def test_unit_coefficient(self, kind):
        mesh = build_space(5)
        xi, w = QuadratureSpec().local_rule(mesh.h, None)
        ke = element_matrices(mesh, 1.0, w, xi, kind)
        ref = sympy_element(sp.Integer(1), 0, sp.Rational(1, 5), kind)
        for e in range(mesh.n):
            np.testing.assert_allclose(ke[e], ref, rtol=1e-12, atol=1e-12)

    def test_closed_form_bending(self):
        h = 0.125
        ref = np.array([[12, 6 * h, -12, 6 * h], [6 * h, 4 * h * h, -6 * h, 2 * h * h],
                        [-12, -6 * h, 12, -6 * h], [6 * h, 2 * h * h, -6 * h, 4 * h * h]]) / h**3
        mesh = build_space(8)
        xi, w = QuadratureSpec().local_rule(h, None)
        np.testing.assert_allclose(element_matrices(mesh, 1.0, w, xi, "bending")[3], ref,
                                   rtol=1e-13)

    @pytest.mark.parametrize("kind", ["bending", "axial"])
    def test_cubic_coefficient_is_exact(self, kind):
        # c only weights stiffness-type blocks: degree <= 7, exact for 4-point Gauss
        coef = 1 + X - 2 * X**2 + X**3
        mesh = build_space(4)
        xi, w = QuadratureSpec().local_rule(mesh.h, None)
        xq = mesh.nodes[:-1, None] + mesh.h * xi[None, :]
        cfun = sp.lambdify(X, coef)
        ke = element_matrices(mesh, cfun(xq), w, xi, kind)
        for e in range(mesh.n):
            ref = sympy_element(coef, sp.Rational(e, 4), sp.Rational(1, 4), kind)
            np.testing.assert_allclose(ke[e], ref, rtol=1e-12, atol=1e-12)


class TestAssembly:
    def test_global_against_dense_sympy(self):
        coef = 2 + sp.sin(3 * X)
        c = mollify_expr(expr(Smooth("2 + sin(3*x)")), None)
        mesh = build_space(4)
        _, b, g = unit_fields()
        sys = assemble(c, b, g, mesh, QuadratureSpec(panels=8))
        ke = np.array([sympy_element(coef, sp.Rational(e, 4), sp.Rational(1, 4), "bending")
                       for e in range(4)])
        np.testing.assert_allclose(sys.Kc.todense(), dense_from_elements(mesh, ke), rtol=1e-11,
                                   atol=1e-9)
        me = np.array([sympy_element(sp.Integer(1), sp.Rational(e, 4), sp.Rational(1, 4), "mass")
                       for e in range(4)])
        np.testing.assert_allclose(sys.M.todense(), dense_from_elements(mesh, me), atol=1e-15)

    def test_matrices_symmetric_positive(self):
        sys = assemble(*unit_fields(), build_space(16))
        for A in (sys.M, sys.Kc, sys.G1, sys.G2):
            D = A.todense()
            np.testing.assert_allclose(D, D.T, atol=1e-10 * np.abs(D).max())
            assert np.linalg.eigvalsh(D).min() > 0

    def test_gram_relations(self):
        sys = assemble(*unit_fields(), build_space(8))
        np.testing.assert_allclose(sys.G0.todense(), sys.M.todense())
        np.testing.assert_allclose(sys.G2.todense() - sys.G1.todense(), sys.Kc.todense(),
                                   atol=1e-9)

    def test_static_problem_nodally_exact(self):
        # u'''' = 24, clamped: u = x^2 (1-x)^2, which lies in the cubic space only
        # piecewise, but Hermite FEM is nodally exact for constant EI
        c, b, g = unit_fields(g=expr(Constant(24.0), arity="xt"))
        mesh = build_space(6)
        sys = assemble(c, b, g, mesh)
        from scipy.linalg import solve_banded
        u = solve_banded((BAND, BAND), sys.Kc.ab, sys.load(0.0))
        full = mesh.embed(u)
        x = mesh.nodes
        np.testing.assert_allclose(full[0::2], x**2 * (1 - x)**2, atol=1e-13)
        np.testing.assert_allclose(full[1::2], 2 * x * (1 - x) * (1 - 2 * x), atol=1e-12)

    def test_quadrature_refinement_regular(self):
        from vwbeam.pipeline import regularize
        from vwbeam.scenarios import builtin
        # stiffness entries scale like h^-3, so the change is measured against
        # the largest entry of each matrix
        f = regularize(builtin("regular"), 0.01)
        mesh = build_space(64)
        one = assemble(f.c, f.b, f.g, mesh, QuadratureSpec(panels=1))
        two = assemble(f.c, f.b, f.g, mesh, QuadratureSpec(panels=2))
        pairs = [(one.Kc, two.Kc), (one.M, two.M), (one.G2, two.G2)]
        pairs += [(a, b) for (a, _), (b, _) in zip(one.kb_parts, two.kb_parts)]
        for a, b in pairs:
            assert np.abs(a.ab - b.ab).max() < 1e-9 * np.abs(a.ab).max()
        np.testing.assert_allclose(one.load(0.3), two.load(0.3), rtol=0, atol=1e-9)

    def test_quadrature_refinement_mollified_dirac(self):
        # the bump needs the panel rule; convergence is relative to the entry scale
        c = mollify_expr(expr(Constant(1.0), Dirac(0.43)), MollifierNet(0.05))
        _, b, g = unit_fields()
        mesh = build_space(32)
        ref = assemble(c, b, g, mesh, QuadratureSpec(panels=64)).Kc.ab
        errs = [np.abs(assemble(c, b, g, mesh, QuadratureSpec(panels=p)).Kc.ab - ref).max()
                for p in (1, 2, 4, 8, 16)]
        assert all(a > b for a, b in zip(errs, errs[1:]))
        assert errs[-1] / np.abs(ref).max() < 1e-9

    def test_resolution_warning(self):
        c = mollify_expr(expr(Constant(1.0), Dirac(0.5)), MollifierNet(0.01))
        _, b, g = unit_fields()
        with pytest.warns(ResolutionWarning):
            assemble(c, b, g, build_space(16))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assemble(c, b, g, build_space(256))

    def test_constant_fields_set_no_scale(self):
        sys = assemble(*unit_fields(eps=0.01), build_space(8))
        assert sys.epsilon is None

    def test_banded_ops(self):
        sys = assemble(*unit_fields(), build_space(8))
        x = np.random.default_rng(1).standard_normal(sys.size)
        np.testing.assert_allclose(sys.G2.matvec(x), sys.G2.todense() @ x, rtol=1e-12)
        np.testing.assert_allclose((sys.M * 2.0 + sys.Kc) @ x,
                                   2 * sys.M.todense() @ x + sys.Kc.todense() @ x, rtol=1e-12)
        assert isinstance(BandedMatrix.zeros(3), BandedMatrix)


class TestLoads:
    def test_point_load_is_basis_values(self):
        mesh = build_space(10)
        v = point_load(mesh, 0.537, 2.0)
        # pair with a known Hermite interpolant: v . coeffs = 2 * u_h(0.537)
        coeffs = hermite_interpolant(lambda x: np.sin(np.pi * x)**2,
                                     lambda x: np.pi * np.sin(2 * np.pi * x), mesh)
        assert v @ coeffs == pytest.approx(2 * eval_solution(coeffs, mesh, np.array([0.537]))[0])

    def test_mollified_dirac_load_tends_to_point_load(self):
        mesh = build_space(16)
        g = expr(Dirac(0.5), arity="xt")
        diffs = []
        for eps in (0.2, 0.1, 0.05):
            c, b, gf = unit_fields(g=g, eps=eps)
            sys = assemble(c, b, gf, mesh)
            diffs.append(np.abs(sys.load(0.0) - point_load(mesh, 0.5)).max())
        assert diffs[0] > diffs[1] > diffs[2]

    def test_exact_dirac_loads_option(self):
        mesh = build_space(8)
        c, b, g = unit_fields(g=expr(Dirac(0.3, 1.5), arity="xt"), eps=0.1)
        sys = assemble(c, b, g, mesh, exact_dirac_loads=True)
        np.testing.assert_allclose(sys.load(0.7), point_load(mesh, 0.3, 1.5))


class TestProjection:
    def test_interpolant_reproduces_cubic_pieces(self):
        mesh = build_space(4)
        f = lambda x: x**2 * (1 - x)**2  # noqa: E731
        df = lambda x: 2 * x * (1 - x) * (1 - 2 * x)  # noqa: E731
        coeffs = hermite_interpolant(f, df, mesh)
        x = np.linspace(0, 1, 41)
        # quartic, so only nodal values are exact; the error is O(h^4)
        np.testing.assert_allclose(eval_solution(coeffs, mesh, mesh.nodes), f(mesh.nodes),
                                   atol=1e-15)
        assert np.abs(eval_solution(coeffs, mesh, x) - f(x)).max() < mesh.h**4

    def test_l2_projection_is_orthogonal(self):
        mesh = build_space(8)
        fn = lambda x: np.exp(x) * x * (1 - x)  # noqa: E731
        p = l2_projection(fn, mesh)
        xi, w = QuadratureSpec(panels=4).local_rule(mesh.h, None)
        xq = (mesh.nodes[:-1, None] + mesh.h * xi[None, :]).ravel()
        wq = np.tile(w * mesh.h, mesh.n)
        r = fn(xq) - eval_solution(p, mesh, xq)
        for k in range(mesh.free_count):
            e = np.zeros(mesh.free_count)
            e[k] = 1.0
            assert abs(np.sum(wq * r * eval_solution(e, mesh, xq))) < 1e-13

    def test_project_initial_dispatch(self):
        mesh = build_space(8)
        smooth = project_initial(expr(Smooth("x**2*(1-x)**2")), mesh)
        np.testing.assert_allclose(smooth[0::2], (mesh.nodes**2 * (1 - mesh.nodes)**2)[1:-1])
        assert np.all(project_initial(expr(Constant(0.0)), mesh) == 0.0)

    def test_eval_batch_shape(self):
        mesh = build_space(4)
        U = np.random.default_rng(0).standard_normal((3, mesh.free_count))
        out = eval_solution(U, mesh, np.linspace(0, 1, 7), deriv=2)
        assert out.shape == (3, 7)
        np.testing.assert_allclose(eval_solution(U, mesh, np.array([0.0, 1.0])), 0.0)

import numpy as np
import pytest

from epsim import fockspace as fs
from epsim import model as md
from epsim import spectral as sp
from epsim import trajectory as tj
from epsim.errors import StepSizeError, TruncationGuardError


@pytest.fixture
def fast_config():
    return tj.TrajectoryConfig(dt=0.01, t_final=0.5, n_traj=64, seed=17, cutoff=6)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            tj.TrajectoryConfig(dt=-0.1, t_final=1.0, n_traj=1, seed=0)
        with pytest.raises(ValueError):
            tj.TrajectoryConfig(dt=0.01, t_final=1.0, n_traj=0, seed=0)
        with pytest.raises(ValueError):
            tj.TrajectoryConfig(dt=0.03, t_final=1.0, n_traj=1, seed=0)

    def test_sample_grid_covers_endpoints(self):
        cfg = tj.TrajectoryConfig(dt=0.01, t_final=1.0, n_traj=1, seed=0, sample_every=30)
        assert cfg.sample_steps[0] == 0
        assert cfg.sample_steps[-1] == cfg.n_steps


class TestNoJumpPropagator:
    def test_short_step_near_identity(self, std_params):
        dt = 1e-6
        u = tj.no_jump_propagator(std_params, 4, dt)
        h_nh = md.build_h_nh(std_params, 4)
        assert np.max(np.abs(u - np.eye(16))) <= np.linalg.norm(h_nh) * dt

    def test_single_mode_survival_decay(self):
        # one-photon state of a single lossy mode: norm^2 after t is exp(-2*ga*t)
        p = md.SystemParams(g=1e-300, gamma_a=0.8, gamma_b=0.0, eps=0.0)
        psi = fs.basis_state(3, 1, 0)
        for t in (0.3, 1.0):
            u = tj.no_jump_propagator(p, 3, t)
            survival = np.linalg.norm(u @ psi) ** 2
            assert survival == pytest.approx(np.exp(-2 * 0.8 * t), rel=1e-10)

    def test_contractive_without_drive(self):
        p = md.SystemParams(g=1.0, gamma_a=2.5, gamma_b=1.5, eps=0.0)
        u = tj.no_jump_propagator(p, 4, 0.05)
        rng = np.random.default_rng(8)
        for _ in range(50):
            psi = rng.standard_normal(16) + 1j * rng.standard_normal(16)
            psi /= np.linalg.norm(psi)
            assert np.linalg.norm(u @ psi) <= 1.0 + 1e-12


class TestDeterminism:
    def test_bitwise_reproducible(self, std_params, fast_config):
        a = tj.run_ensemble(std_params, fast_config)
        b = tj.run_ensemble(std_params, fast_config)
        assert np.array_equal(a.rho_avg, b.rho_avg)
        assert a.jump_records == b.jump_records
        assert np.array_equal(a.survivals, b.survivals)

    def test_single_matches_ensemble_member(self, std_params, fast_config):
        # jump records are exactly reproducible; survivals agree up to the
        # ULP-level effect of BLAS blocking across batch shapes
        ensemble = tj.run_ensemble(std_params, fast_config)
        for index in (0, 5, 63):
            single = tj.run_trajectory(std_params, fast_config, traj_index=index)
            assert single.jumps == ensemble.jump_records[index]
            assert single.survival == pytest.approx(
                ensemble.survivals[index], rel=1e-12
            )

    def test_chunk_partition_invariance(self, std_params, fast_config):
        engine = tj._Engine(std_params, fast_config)
        psi0 = fs.basis_state(6, 0, 0)
        whole = engine.run_chunk(psi0, range(0, 64))
        left = engine.run_chunk(psi0, range(0, 29))
        right = engine.run_chunk(psi0, range(29, 64))
        assert whole["jumps"] == left["jumps"] + right["jumps"]
        np.testing.assert_allclose(
            whole["survival"],
            np.concatenate([left["survival"], right["survival"]]),
            rtol=1e-12,
        )

    def test_worker_count_invariance(self, std_params, fast_config):
        serial = tj.run_ensemble(std_params, fast_config, workers=1)
        threaded = tj.run_ensemble(std_params, fast_config, workers=4)
        assert np.array_equal(serial.rho_avg, threaded.rho_avg)
        assert serial.jump_records == threaded.jump_records


class TestNormBookkeeping:
    def test_survival_equals_product_of_step_probs(self, std_params, fast_config):
        result = tj.run_trajectory(
            std_params, fast_config, traj_index=2, record_probs=True
        )
        jump_steps = {round(t / fast_config.dt) - 1 for t, _ in result.jumps}
        product = 1.0
        for step, q in enumerate(result.no_jump_probs):
            if step not in jump_steps:
                product *= q
        assert result.survival == pytest.approx(product, rel=1e-10)
        assert 0.0 < result.survival <= 1.0

    def test_postselected_matches_exponential_evolution(self, std_params):
        cfg = tj.TrajectoryConfig(dt=0.01, t_final=1.0, n_traj=1, seed=0, cutoff=6)
        post = tj.postselect_no_jump(std_params, cfg)
        h_nh = md.build_h_nh(std_params, 6)
        reference = sp.mat_exp(-1j * h_nh * 1.0) @ fs.basis_state(6, 0, 0)
        reference /= np.linalg.norm(reference)
        assert np.linalg.norm(post.final_state - reference) < 1e-8


class TestJumpStatistics:
    def test_closed_system_never_jumps(self):
        p = md.SystemParams(g=1.0, gamma_a=0.0, gamma_b=0.0, eps=0.0)
        cfg = tj.TrajectoryConfig(dt=0.01, t_final=1.0, n_traj=16, seed=5, cutoff=3)
        ensemble = tj.run_ensemble(p, cfg, fs.basis_state(3, 1, 0))
        assert all(not jumps for jumps in ensemble.jump_records)
        # unitary evolution under the coupling: exchange oscillation intact
        final = ensemble.rho_avg[-1]
        expected_psi = sp.mat_exp(
            -1j * md.build_hamiltonian(p, 3) * 1.0
        ) @ fs.basis_state(3, 1, 0)
        expected = np.outer(expected_psi, expected_psi.conj())
        assert tj.trace_distance(final, expected) < 1e-10

    def test_single_mode_zero_or_one_jump(self):
        p = md.SystemParams(g=1e-300, gamma_a=1.0, gamma_b=0.0, eps=0.0)
        cfg = tj.TrajectoryConfig(dt=0.005, t_final=3.0, n_traj=2000, seed=31, cutoff=2, sample_every=200)
        ensemble = tj.run_ensemble(p, cfg, fs.basis_state(2, 1, 0))
        counts = {len(j) for j in ensemble.jump_records}
        assert counts <= {0, 1}
        times = np.sort([j[0][0] for j in ensemble.jump_records if j])
        empirical_hi = np.arange(1, len(times) + 1) / cfg.n_traj
        empirical_lo = np.arange(len(times)) / cfg.n_traj
        theory = 1.0 - np.exp(-2.0 * times)
        ks = max(
            np.max(np.abs(empirical_hi - theory)),
            np.max(np.abs(empirical_lo - theory)),
        )
        assert ks <= 0.05  # 2000 trajectories; the acceptance run tightens this

    def test_drive_increases_jump_rate(self):
        # photon emission rate grows with the drive amplitude
        means = []
        for eps in (0.0, 0.5, 1.0):
            p = md.SystemParams(g=1.0, gamma_a=2.5, gamma_b=1.5, eps=eps)
            cfg = tj.TrajectoryConfig(dt=0.01, t_final=1.0, n_traj=400, seed=77, cutoff=6, sample_every=100)
            means.append(tj.run_ensemble(p, cfg).mean_jumps[-1])
        assert means[0] < means[1] < means[2]


class TestGuards:
    def test_step_size_error(self):
        p = md.SystemParams(g=1e-300, gamma_a=3.0, gamma_b=0.0, eps=0.0)
        cfg = tj.TrajectoryConfig(dt=0.01, t_final=0.1, n_traj=4, seed=1, cutoff=3)
        with pytest.raises(StepSizeError):
            tj.run_ensemble(p, cfg, fs.basis_state(3, 1, 0))

    def test_truncation_guard_on_creation_jump(self):
        # a gain jump fired on a state with top-level weight must abort
        p = md.SystemParams(g=1e-300, gamma_a=1.0, gamma_b=0.0, eps=0.0, n_th=5.0)
        cfg = tj.TrajectoryConfig(dt=0.001, t_final=1.0, n_traj=64, seed=3, cutoff=3)
        psi0 = (fs.basis_state(3, 1, 0) + fs.basis_state(3, 2, 0)) / np.sqrt(2)
        with pytest.raises(TruncationGuardError):
            tj.run_ensemble(p, cfg, psi0)

    def test_guard_threshold_override(self):
        p = md.SystemParams(g=1e-300, gamma_a=1.0, gamma_b=0.0, eps=0.0, n_th=5.0)
        cfg = tj.TrajectoryConfig(
            dt=0.001, t_final=0.1, n_traj=16, seed=3, cutoff=3, guard_threshold=1.0
        )
        psi0 = (fs.basis_state(3, 1, 0) + fs.basis_state(3, 2, 0)) / np.sqrt(2)
        ensemble = tj.run_ensemble(p, cfg, psi0)  # completes
        assert ensemble.rho_avg.shape[0] == len(cfg.sample_steps)

    def test_initial_state_must_be_normalized(self, std_params, fast_config):
        with pytest.raises(ValueError):
            tj.run_trajectory(std_params, fast_config, 2.0 * fs.basis_state(6, 0, 0))


class TestEnsembleVsMaster:
    def test_master_propagate_single_mode_decay(self):
        p = md.SystemParams(g=1e-300, gamma_a=0.5, gamma_b=0.0, eps=0.0)
        rho0 = np.outer(fs.basis_state(2, 1, 0), fs.basis_state(2, 1, 0).conj())
        times = np.array([0.0, 0.5, 1.0])
        rhos = tj.master_propagate(p, 2, rho0, times)
        i1 = fs.fock_index(2, 1, 0)
        for t, rho in zip(times, rhos):
            assert rho[i1, i1].real == pytest.approx(np.exp(-2 * 0.5 * t), abs=1e-10)

    def test_trace_distance_basics(self):
        rho = np.diag([0.5, 0.5]).astype(complex)
        assert tj.trace_distance(rho, rho) == 0.0
        pure0 = np.diag([1.0, 0.0]).astype(complex)
        pure1 = np.diag([0.0, 1.0]).astype(complex)
        assert tj.trace_distance(pure0, pure1) == pytest.approx(1.0)

    def test_small_ensemble_tracks_master(self, std_params):
        cfg = tj.TrajectoryConfig(dt=0.01, t_final=1.0, n_traj=500, seed=2024, cutoff=6, sample_every=25)
        report = tj.ensemble_vs_master(std_params, cfg)
        assert report.trace_distances[0] < 1e-12
        assert report.trace_distances.max() < 0.1
        assert report.seed == 2024
        for rho in report.rho_trajectories:  # averaged states keep unit trace
            assert abs(np.trace(rho) - 1.0) < 1e-8

    def test_convergence_with_ensemble_size(self, std_params):
        # trace distance decreases with trajectory count (allowing noise bands)
        distances = []
        for n_traj in (100, 1000):
            cfg = tj.TrajectoryConfig(dt=0.01, t_final=1.0, n_traj=n_traj, seed=6, cutoff=6, sample_every=100)
            distances.append(tj.ensemble_vs_master(std_params, cfg).trace_distances[-1])
        assert distances[1] < distances[0]

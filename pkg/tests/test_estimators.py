import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from afrelay import EqualPowerDesign, MMSERelayDesign, MSRRelayDesign
from afrelay.exceptions import ValidationError
from afrelay.network import Topology, compute_stats, draw_channels, propagate
from afrelay.sim import qpsk_modulate


@pytest.fixture
def channels():
    return draw_channels(Topology((1, 4, 4, 2)), seed=4)


class TestParams:
    def test_get_set_clone(self):
        est = MMSERelayDesign(constraint="local", iterations=3)
        assert est.get_params()["constraint"] == "local"
        est.set_params(snr_db=15.0)
        twin = clone(est)
        assert twin.get_params() == est.get_params()

    @pytest.mark.parametrize(
        "est",
        [
            MMSERelayDesign(constraint="weighted"),
            MMSERelayDesign(iterations=0),
            MMSERelayDesign(total_power=-1.0),
            MSRRelayDesign(solver="lanczos"),
            EqualPowerDesign(receiver="zf"),
        ],
    )
    def test_invalid_params_raise_on_fit(self, est, channels):
        with pytest.raises(ValidationError):
            est.fit(channels)

    def test_bad_channel_input(self):
        with pytest.raises(ValidationError):
            MMSERelayDesign().fit("channels")
        with pytest.raises(ValidationError):
            MMSERelayDesign().fit([np.ones((4, 1)), np.ones((4, 4))])


class TestFitted:
    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            MMSERelayDesign().transform(np.ones((2, 2)))

    @pytest.mark.parametrize("constraint", ["global", "local", "individual"])
    def test_mmse_fit_and_score(self, channels, constraint):
        est = MMSERelayDesign(constraint=constraint).fit(channels)
        assert est.relay_powers_.sum() == pytest.approx(8.0, rel=1e-8)
        assert est.score() == -est.mse_trace_[-1]
        assert len(est.mse_trace_) == 3

    def test_list_input_equivalent(self, channels):
        a = MMSERelayDesign().fit(channels)
        b = MMSERelayDesign().fit(channels.links)
        np.testing.assert_array_equal(a.receiver_, b.receiver_)

    def test_predict_recovers_bits_at_high_snr(self, channels):
        est = MMSERelayDesign(snr_db=30.0).fit(channels)
        rng = np.random.default_rng(0)
        bits = rng.integers(0, 2, 400)
        s = qpsk_modulate(bits)[None, :]
        st = compute_stats(est.topology_, est.channels_, est.gains_)
        d = propagate(est.topology_, est.channels_, est.gains_, st, s, seed=1).received
        decided = est.predict(d.T)
        assert decided.shape == (200, 2)
        assert np.mean(decided.ravel() != bits) < 0.02

    def test_transform_checks_width(self, channels):
        est = MMSERelayDesign().fit(channels)
        with pytest.raises(ValidationError):
            est.transform(np.ones((3, 5)))

    def test_msr_beats_equal(self, channels):
        msr = MSRRelayDesign().fit(channels)
        eq = EqualPowerDesign(receiver="msr").fit(channels)
        assert msr.score() >= eq.score()
        assert msr.transform(np.ones((4, 2))).shape == (4, 1)

    def test_equal_mmse(self, channels):
        eq = EqualPowerDesign().fit(channels)
        mm = MMSERelayDesign(constraint="local").fit(channels)
        assert mm.score() >= eq.score()

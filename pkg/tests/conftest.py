import pytest

from zakofdm.sweep import OFDMSearch, OTFSSearch, SweepSpec


@pytest.fixture
def tiny_spec():
    """One-cell spec with a handful of candidates per waveform."""
    return SweepSpec(
        tau_max_list=(0.0,),
        nu_max_list=(0.0,),
        n_frames=10,
        seed=7,
        otfs_search=OTFSSearch(nu_p=(8e3,), pdr_db=(-5.0,), layouts=("narrow",), mcs=(1, 3)),
        ofdm_search=OFDMSearch(delta_f=(30e3,), boost_db=(0.0,), dmrs=(1,), mcs=(1, 3)),
    )

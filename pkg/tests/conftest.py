from hypothesis import settings

# numerical oracles (quadrature, scipy matrix functions) have uneven run times
settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

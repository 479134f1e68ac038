import hypothesis

# Property tests share time with seeded end-to-end runs; no deadline keeps
# slow-CI flakes out of the picture.
hypothesis.settings.register_profile("scope_lab", deadline=None, max_examples=60)
hypothesis.settings.load_profile("scope_lab")

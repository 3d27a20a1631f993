import pluggy

hookspec = pluggy.HookspecMarker("epo")
hookimpl = pluggy.HookimplMarker("epo")


class TrainingHookSpec:
    @hookspec
    def before_train(self, config, run_dir):
        """Run once the run directory exists, before the first iteration"""

    @hookspec
    def after_iteration(self, row):
        """Run after every iteration with its metrics row (a dict keyed by CSV column)"""

    @hookspec
    def on_evolution(self, event):
        """Run after the genetic step replaced follower genes"""

    @hookspec
    def on_checkpoint(self, path, iteration):
        """Run after a checkpoint file was written"""

    @hookspec
    def after_train(self, result):
        """Run when training stops, successfully or not"""

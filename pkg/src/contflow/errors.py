"""Exception types raised across the toolkit."""


class ContflowError(Exception):
    """Base class for all toolkit errors."""


class CycleWithinIteration(ContflowError):
    def __init__(self, tasks):
        self.tasks = tuple(tasks)
        super().__init__(f"cycle within one iteration through {', '.join(self.tasks)}")


class CycleDetected(ContflowError):
    def __init__(self, remaining):
        self.remaining = tuple(remaining)
        super().__init__(f"cycle detected among {len(self.remaining)} instances")


class UnknownSite(ContflowError):
    def __init__(self, site):
        self.site = site
        super().__init__(f"unknown site {site!r}")


class InfeasibleOffer(ContflowError):
    def __init__(self, offer, task, reason=""):
        self.offer = offer
        self.task = task
        msg = f"offer {offer!r} cannot host task {task!r}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class NoFeasibleOffer(ContflowError):
    def __init__(self, subject):
        self.subject = subject
        super().__init__(f"no feasible offer for {subject!r}")


class MalformedEvent(ContflowError):
    def __init__(self, index, reason):
        self.index = index
        super().__init__(f"trace event {index}: {reason}")


class NonMonotoneTimestamp(ContflowError):
    def __init__(self, index, task):
        self.index = index
        self.task = task
        super().__init__(f"trace event {index}: timestamp goes backwards for task {task!r}")


class EmptyGraph(ContflowError):
    pass


class CyclicLifecycle(ContflowError):
    pass


class IncompletePlacement(ContflowError):
    def __init__(self, missing):
        self.missing = tuple(missing)
        super().__init__(f"placement missing {len(self.missing)} instances, e.g. {self.missing[0]!r}")


class FormatError(ContflowError):
    """A file could not be parsed into a valid model object."""

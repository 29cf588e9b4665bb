import logging
from threading import Thread

logger = logging.getLogger(__name__)


class SweepWorker:
    """
    Run independent sweep jobs (seeds, rates, grid sizes) on a background thread
    """

    def __init__(self, jobs=None):
        """
        jobs (list): zero-argument callables; a job fails when it raises
        """
        self.stats = []  # True per job that returned, False per job that raised
        self.results = []  # return value per job, None for failures
        self.jobs = jobs if jobs is not None else []
        self.result = 0  # number of jobs that succeeded
        self.thread = None

    def add_job(self, job):
        self.jobs.append(job)

    def run(self):
        """
        Starts execution of all jobs in a separate thread
        """
        self.thread = Thread(target=self.__run)
        self.thread.start()

    def join(self):
        if self.thread:
            self.thread.join()

    def __run(self):
        for i, job in enumerate(self.jobs):
            try:
                self.results.append(job())
                self.stats.append(True)
            except Exception as e:
                logger.warning("sweep job %d failed: %s", i + 1, e)
                self.results.append(None)
                self.stats.append(False)

        self.result = sum(1 for x in self.stats if x is True)


def run_sweep(jobs, n_workers=1):
    """
    Spread jobs round-robin over n_workers threads and return the outputs in
    job order, with None for failed jobs
    """
    if n_workers < 1:
        raise ValueError("n_workers must be at least 1")
    workers = [SweepWorker() for _ in range(min(n_workers, max(len(jobs), 1)))]
    for i, job in enumerate(jobs):
        workers[i % len(workers)].add_job(job)
    for worker in workers:
        worker.run()
    for worker in workers:
        worker.join()
    return [workers[i % len(workers)].results[i // len(workers)] for i in range(len(jobs))]

import io
from setuptools import setup, find_packages

VERSION = "0.1.0"
PACKAGE_NAME = "featuresort"
SOURCE_DIR_NAME = "src"


def readme():
    with io.open('README.md', 'r', encoding='utf-8') as f:
        return f.read()


setup(
    name=PACKAGE_NAME,
    version=VERSION,
    description="Multi-object tracker with feature-bank association and offline trajectory refinement",
    long_description=readme(),
    long_description_content_type="text/markdown",
    package_dir={'': SOURCE_DIR_NAME},
    packages=find_packages(SOURCE_DIR_NAME, exclude=('*.tests',)),
    include_package_data=True,
    zip_safe=False,
    package_data={},
    license='MIT',
    python_requires='>=3.8',
    classifiers=[
        'Development Status :: 4 - Beta',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python',
        'Topic :: Scientific/Engineering :: Image Recognition',
    ],
    install_requires=[
        "numpy<2",
        "scipy",
        "scikit-learn",
        "motmetrics",
        "prometheus-client",
    ],
    extras_require={
        'test': ['pytest'],
    },
    entry_points={
        'console_scripts': [
            'featuresort = featuresort.main:main',
        ],
    }
)
